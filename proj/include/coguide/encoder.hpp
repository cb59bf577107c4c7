#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "coguide/autodiff.hpp"

namespace coguide {

// Single-direction LSTM parameters. Gate layout along columns: input, forget,
// cell candidate, output.
template <class T>
struct LstmParams {
  Parameter<T>* input_weight = nullptr;      // d_in x 4h
  Parameter<T>* recurrent_weight = nullptr;  // h x 4h
  Parameter<T>* bias = nullptr;              // 1 x 4h

  static LstmParams create(ParamStore<T>& store, const std::string& prefix, std::size_t in_dim,
                           std::size_t hidden, Rng& rng) {
    LstmParams p;
    p.input_weight = &store.add(prefix + ".wx", in_dim, 4 * hidden, Init::uniform_fan_in, rng);
    p.recurrent_weight = &store.add(prefix + ".wh", hidden, 4 * hidden, Init::uniform_fan_in, rng);
    p.bias = &store.add(prefix + ".b", 1, 4 * hidden, Init::zeros, rng);
    return p;
  }

  std::size_t hidden() const { return recurrent_weight->value.rows(); }
};

// Row i of the output is forward_state(i) || backward_state(i); initial states are zero.
template <class T>
class Bilstm {
 public:
  Bilstm() = default;
  Bilstm(ParamStore<T>& store, const std::string& prefix, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    if (out_dim == 0 || out_dim % 2 != 0) {
      throw DimensionError("bilstm '" + prefix + "': output width must be even, got " + std::to_string(out_dim));
    }
    forward_ = LstmParams<T>::create(store, prefix + ".fw", in_dim, out_dim / 2, rng);
    backward_ = LstmParams<T>::create(store, prefix + ".bw", in_dim, out_dim / 2, rng);
  }

  std::size_t in_dim() const { return forward_.input_weight->value.rows(); }
  std::size_t out_dim() const { return 2 * forward_.hidden(); }
  const LstmParams<T>& forward_params() const { return forward_; }
  const LstmParams<T>& backward_params() const { return backward_; }

  Tensor<T> operator()(const Tensor<T>& seq) const {
    if (seq.rows() == 0) throw DimensionError("bilstm: empty input sequence");
    if (seq.cols() != in_dim()) {
      throw DimensionError("bilstm: input " + seq.shape().str() + " does not match input width " +
                           std::to_string(in_dim()));
    }
    auto fw = run(seq, forward_, false);
    auto bw = run(seq, backward_, true);
    return ops::concat_cols({ops::concat_rows(fw), ops::concat_rows(bw)});
  }

 private:
  // Returns per-position hidden states in sequence order.
  static std::vector<Tensor<T>> run(const Tensor<T>& seq, const LstmParams<T>& p, bool reverse) {
    auto& tape = seq.tape();
    const std::size_t n = seq.rows();
    const std::size_t h = p.hidden();
    auto projected = ops::add_row(ops::matmul(seq, tape.param(*p.input_weight)), tape.param(*p.bias));
    auto wh = tape.param(*p.recurrent_weight);
    std::vector<Tensor<T>> states(n);
    Tensor<T> hprev, cprev;
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t t = reverse ? n - 1 - step : step;
      auto pre = ops::slice_rows(projected, t, 1);
      if (step > 0) pre = ops::add(pre, ops::matmul(hprev, wh));
      auto in_gate = ops::sigmoid(ops::slice_cols(pre, 0, h));
      auto cand = ops::tanh(ops::slice_cols(pre, 2 * h, h));
      auto out_gate = ops::sigmoid(ops::slice_cols(pre, 3 * h, h));
      auto c = ops::mul(in_gate, cand);
      if (step > 0) c = ops::add(ops::mul(ops::sigmoid(ops::slice_cols(pre, h, h)), cprev), c);
      auto hs = ops::mul(out_gate, ops::tanh(c));
      states[t] = hs;
      hprev = hs;
      cprev = c;
    }
    return states;
  }

  LstmParams<T> forward_;
  LstmParams<T> backward_;
};

// Single-head scaled dot-product self-attention with bias-free Q/K/V projections.
template <class T>
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParamStore<T>& store, const std::string& prefix, std::size_t in_dim, std::size_t attn_dim,
                Rng& rng) {
    wq_ = &store.add(prefix + ".wq", in_dim, attn_dim, Init::uniform_fan_in, rng);
    wk_ = &store.add(prefix + ".wk", in_dim, attn_dim, Init::uniform_fan_in, rng);
    wv_ = &store.add(prefix + ".wv", in_dim, attn_dim, Init::uniform_fan_in, rng);
  }

  std::size_t attn_dim() const { return wq_->value.cols(); }

  // Returns H' = softmax(Q K^T / sqrt(d_k)) V; the weights go to `weights` if given.
  Tensor<T> operator()(const Tensor<T>& x, Matrix<T>* weights = nullptr) const {
    auto& tape = x.tape();
    auto q = ops::matmul(x, tape.param(*wq_));
    auto k = ops::matmul(x, tape.param(*wk_));
    auto v = ops::matmul(x, tape.param(*wv_));
    const T inv = T{1} / std::sqrt(static_cast<T>(attn_dim()));
    auto alpha = ops::softmax_rows(ops::scale(ops::matmul_nt(q, k), inv));
    if (weights) *weights = alpha.value();
    return ops::matmul(alpha, v);
  }

 private:
  Parameter<T>* wq_ = nullptr;
  Parameter<T>* wk_ = nullptr;
  Parameter<T>* wv_ = nullptr;
};

struct EncoderDims {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  std::size_t lstm_dim = 32;
  std::size_t attention_dim = 32;

  std::size_t output_dim() const { return lstm_dim + attention_dim; }
};

// Shared self-attentive encoder: H = BiLSTM(E[x]) || SelfAttention(E[x]).
template <class T>
class SharedEncoder {
 public:
  SharedEncoder() = default;
  SharedEncoder(ParamStore<T>& store, const EncoderDims& dims, Rng& rng) : dims_(dims) {
    embedding_ = &store.add("encoder.embedding", dims.vocab_size, dims.embedding_dim, Init::normal_embedding, rng);
    bilstm_ = Bilstm<T>(store, "encoder.bilstm", dims.embedding_dim, dims.lstm_dim, rng);
    attention_ = SelfAttention<T>(store, "encoder.attention", dims.embedding_dim, dims.attention_dim, rng);
  }

  const EncoderDims& dims() const { return dims_; }
  std::size_t output_dim() const { return dims_.output_dim(); }

  // With a non-null `rng`, dropout at `rate` is applied to the embedded tokens.
  Tensor<T> operator()(Tape<T>& tape, std::span<const int> token_ids, Matrix<T>* attention = nullptr,
                       double rate = 0.0, Rng* rng = nullptr) const {
    auto x = ops::embedding(tape, *embedding_, token_ids);
    if (rng) x = ops::dropout(x, rate, *rng);
    return ops::concat_cols({bilstm_(x), attention_(x, attention)});
  }

 private:
  EncoderDims dims_;
  Parameter<T>* embedding_ = nullptr;
  Bilstm<T> bilstm_;
  SelfAttention<T> attention_;
};

}  // namespace coguide
