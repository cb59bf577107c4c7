#pragma once

// Two-layer decoder heads and the discrete label selections made from their
// outputs (token-level intent voting, per-token slot argmax).

#include <string>
#include <vector>

#include "coguide/autodiff.hpp"

namespace coguide {

enum class HeadOutput { sigmoid, softmax };

// y = out( W1 sigma(W2 h + b2) + b1 ) applied row-wise; sigma is leaky-ReLU.
template <class T>
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(ParamStore<T>& store, const std::string& prefix, std::size_t in_dim, std::size_t hidden,
          std::size_t out_dim, HeadOutput output, T slope, Rng& rng)
      : output_(output), slope_(slope) {
    w2_ = &store.add(prefix + ".w2", in_dim, hidden, Init::uniform_fan_in, rng);
    b2_ = &store.add(prefix + ".b2", 1, hidden, Init::zeros, rng);
    w1_ = &store.add(prefix + ".w1", hidden, out_dim, Init::uniform_fan_in, rng);
    b1_ = &store.add(prefix + ".b1", 1, out_dim, Init::zeros, rng);
  }

  std::size_t in_dim() const { return w2_->value.rows(); }
  std::size_t out_dim() const { return w1_->value.cols(); }
  Parameter<T>& w1() const { return *w1_; }
  Parameter<T>& b1() const { return *b1_; }
  Parameter<T>& w2() const { return *w2_; }
  Parameter<T>& b2() const { return *b2_; }

  Tensor<T> operator()(const Tensor<T>& h) const {
    auto& tape = h.tape();
    auto hidden = ops::leaky_relu(ops::add_row(ops::matmul(h, tape.param(*w2_)), tape.param(*b2_)), slope_);
    auto logits = ops::add_row(ops::matmul(hidden, tape.param(*w1_)), tape.param(*b1_));
    return output_ == HeadOutput::sigmoid ? ops::sigmoid(logits) : ops::softmax_rows(logits);
  }

 private:
  HeadOutput output_ = HeadOutput::sigmoid;
  T slope_ = T(0.2);
  Parameter<T>* w2_ = nullptr;
  Parameter<T>* b2_ = nullptr;
  Parameter<T>* w1_ = nullptr;
  Parameter<T>* b1_ = nullptr;
};

// Intent l is selected iff more than half of the n tokens give it probability
// >= threshold. An empty vote falls back to the single intent with the most
// token hits (ties: higher mean probability, then lower id). Result is sorted by id.
template <class T>
std::vector<int> intent_voting(const Matrix<T>& token_probs, double threshold = 0.5) {
  const std::size_t n = token_probs.rows();
  const std::size_t labels = token_probs.cols();
  if (n == 0 || labels == 0) return {};
  std::vector<std::size_t> hits(labels, 0);
  std::vector<double> mean(labels, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < labels; ++l) {
      const double p = static_cast<double>(token_probs(i, l));
      if (p >= threshold) ++hits[l];
      mean[l] += p / static_cast<double>(n);
    }
  std::vector<int> selected;
  for (std::size_t l = 0; l < labels; ++l)
    if (2 * hits[l] > n) selected.push_back(static_cast<int>(l));
  if (!selected.empty()) return selected;
  std::size_t best = 0;
  for (std::size_t l = 1; l < labels; ++l) {
    if (hits[l] > hits[best] || (hits[l] == hits[best] && mean[l] > mean[best])) best = l;
  }
  return {static_cast<int>(best)};
}

// Per-row argmax; ties go to the lowest id.
template <class T>
std::vector<int> slot_argmax(const Matrix<T>& probs) {
  std::vector<int> out;
  out.reserve(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j)
      if (probs(i, j) > probs(i, best)) best = j;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace coguide
