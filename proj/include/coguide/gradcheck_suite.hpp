#pragma once

// Finite-difference checks for every differentiable component, at 64-bit
// precision and small widths. Each component gets its own parameter store
// with its inputs registered as parameters, and a fixed random projection
// of its output as the scalar loss.

#include <string>
#include <vector>

#include "coguide/corpus.hpp"
#include "coguide/decoding.hpp"
#include "coguide/encoder.hpp"
#include "coguide/gradcheck.hpp"
#include "coguide/graph.hpp"
#include "coguide/hgat.hpp"
#include "coguide/loss.hpp"
#include "coguide/model.hpp"

namespace coguide {

namespace detail {

template <class T>
Matrix<T> random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix<T> m(r, c);
  for (auto& v : m.values()) v = static_cast<T>(dist(rng));
  return m;
}

// sum(y * R) for a fixed random R.
template <class T>
Tensor<T> project(const Tensor<T>& y, std::uint64_t seed) {
  Rng rng(seed);
  return ops::sum(ops::mul(y, y.tape().constant(random_matrix<T>(y.rows(), y.cols(), rng))));
}

template <class T>
Parameter<T>& input_param(ParamStore<T>& store, std::size_t r, std::size_t c, Rng& rng) {
  auto& p = store.add("input", r, c, Init::zeros, rng);
  p.value = random_matrix<T>(r, c, rng);
  return p;
}

// Builds the same fixture at 64-bit and in extended precision; the latter
// serves as the finite-difference oracle.
template <template <class> class Fixture, class... Args>
GradCheckReport run_fixture(const std::string& name, GradCheckOptions opt, const Args&... args) {
  Fixture<double> analytic(args...);
  Fixture<long double> oracle(args...);
  return grad_check(
      name, analytic.store(), [&](Tape<double>& t) { return analytic.loss(t); }, oracle.store(),
      [&](Tape<long double>& t) { return oracle.loss(t); }, opt);
}

template <class T>
struct EncoderFixture {
  ParamStore<T> params;
  Rng rng{11};
  SharedEncoder<T> enc;
  std::vector<int> ids{2, 5, 2, 6};
  explicit EncoderFixture(const EncoderDims& dims) : enc(params, dims, rng) {}
  ParamStore<T>& store() { return params; }
  Tensor<T> loss(Tape<T>& t) { return project(enc(t, ids), 101); }
};

template <class T>
struct BilstmFixture {
  ParamStore<T> params;
  Rng rng;
  Bilstm<T> lstm;
  Parameter<T>* input;
  std::uint64_t seed;
  BilstmFixture(const std::string& name, std::size_t in_dim, std::size_t out_dim, std::size_t n, std::uint64_t s)
      : rng(s), lstm(params, name, in_dim, out_dim, rng), input(&input_param(params, n, in_dim, rng)), seed(s) {}
  ParamStore<T>& store() { return params; }
  Tensor<T> loss(Tape<T>& t) { return project(lstm(t.param(*input)), seed + 1); }
};

template <class T>
struct HeadFixture {
  ParamStore<T> params;
  Rng rng;
  MlpHead<T> head;
  Parameter<T>* input;
  std::uint64_t seed;
  HeadFixture(const std::string& name, std::size_t in_dim, std::size_t out_dim, HeadOutput kind, std::size_t n,
              std::uint64_t s)
      : rng(s), head(params, name, in_dim, in_dim, out_dim, kind, 0.2, rng),
        input(&input_param(params, n, in_dim, rng)), seed(s) {}
  ParamStore<T>& store() { return params; }
  Tensor<T> loss(Tape<T>& t) { return project(head(t.param(*input)), seed + 1); }
};

template <class T>
struct HgatFixture {
  ParamStore<T> params;
  Rng rng;
  const HeteroGraph& graph;
  HgatStack<T> stack;
  Parameter<T>* input;
  std::uint64_t seed;
  HgatFixture(const std::string& name, const HeteroGraph& g, const ModelConfig& m, std::uint64_t s)
      : rng(s), graph(g), stack(params, name, m.hidden_dim, m.heads, g.num_relations(), m.layers, m.leaky_slope, rng),
        input(&input_param(params, g.num_nodes(), m.hidden_dim, rng)), seed(s) {}
  ParamStore<T>& store() { return params; }
  Tensor<T> loss(Tape<T>& t) { return project(stack(t.param(*input), graph), seed + 1); }
};

template <class T>
struct FullObjectiveFixture {
  CoGuidingNet<T> net;
  EncodedUtterance u;
  const Selections& frozen;
  LossCoefficients c;
  FullObjectiveFixture(const ModelConfig& m, const LabelSpace& labels, const EncodedUtterance& utt,
                       const Selections& sel, const LossCoefficients& coeffs)
      : net(m, labels, 23), u(utt), frozen(sel), c(coeffs) {}
  ParamStore<T>& store() { return net.params(); }
  Tensor<T> loss(Tape<T>& t) {
    auto [s1, s2] = net.forward_full(t, u.token_ids, &frozen);
    return compute_losses(s1.intent_probs, s2.intent_probs, s1.slot_probs, s2.slot_probs, u.intent_multihot,
                          u.slot_ids, c).total;
  }
};

}  // namespace detail

struct GradCheckSuiteDims {
  std::size_t tokens = 4;
  std::size_t vocab = 7;
  std::size_t intents = 3;
  std::size_t slots = 5;
  ModelConfig model = [] {
    ModelConfig m;
    m.embedding_dim = 6;
    m.lstm_dim = 6;
    m.attention_dim = 4;
    m.hidden_dim = 8;
    m.heads = 2;
    m.layers = 2;
    m.window = 1;
    return m;
  }();
};

inline GradCheckReport check_encoder(const GradCheckSuiteDims& d, GradCheckOptions opt) {
  const EncoderDims dims{d.vocab, d.model.embedding_dim, d.model.lstm_dim, d.model.attention_dim};
  return detail::run_fixture<detail::EncoderFixture>("encoder", opt, dims);
}

inline GradCheckReport check_bilstm(const std::string& name, std::size_t in_dim, std::size_t out_dim,
                                    std::size_t n, std::uint64_t seed, GradCheckOptions opt) {
  return detail::run_fixture<detail::BilstmFixture>(name, opt, name, in_dim, out_dim, n, seed);
}

inline GradCheckReport check_head(const std::string& name, std::size_t in_dim, std::size_t out_dim, HeadOutput kind,
                                  std::size_t n, std::uint64_t seed, GradCheckOptions opt) {
  return detail::run_fixture<detail::HeadFixture>(name, opt, name, in_dim, out_dim, kind, n, seed);
}

inline GradCheckReport check_hgat(const std::string& name, const HeteroGraph& g, const ModelConfig& m,
                                  std::uint64_t seed, GradCheckOptions opt) {
  return detail::run_fixture<detail::HgatFixture>(name, opt, name, g, m, seed);
}

// Full two-stage objective on one utterance with the stage-1 label choices frozen.
inline GradCheckReport check_full_objective(const GradCheckSuiteDims& d, GradCheckOptions opt) {
  const LabelSpace labels{d.vocab, d.intents, d.slots};
  EncodedUtterance u;
  u.token_ids = {3, 4, 2, 6};
  u.slot_ids = {0, 1, 2, 0};
  u.intent_multihot = {1, 0, 1};
  Selections frozen;
  {
    CoGuidingNet<double> probe(d.model, labels, 23);
    Tape<double> t;
    auto s1 = probe.stage1(t, u.token_ids);
    frozen.slots = s1.estimated_slots;
    frozen.intents = s1.estimated_intents;
  }
  LossCoefficients c;
  c.beta_intent = 0.5;  // exercise both margin terms with visible weight
  c.beta_slot = 1.0;
  return detail::run_fixture<detail::FullObjectiveFixture>("full_objective", opt, d.model, labels, u, frozen, c);
}

inline std::vector<GradCheckReport> run_gradcheck_suite(GradCheckOptions opt = {}, GradCheckSuiteDims d = {}) {
  const auto& m = d.model;
  const std::size_t n = d.tokens;
  std::vector<GradCheckReport> out;
  out.push_back(check_encoder(d, opt));
  out.push_back(check_bilstm("intent_bilstm", m.lstm_dim + m.attention_dim, m.hidden_dim, n, 31, opt));
  out.push_back(check_bilstm("slot_bilstm", m.lstm_dim + m.attention_dim, m.hidden_dim, n, 37, opt));
  out.push_back(check_head("intent_head_stage0", m.hidden_dim, d.intents, HeadOutput::sigmoid, n, 41, opt));
  out.push_back(check_head("slot_head_stage0", m.hidden_dim, d.slots, HeadOutput::softmax, n, 43, opt));
  out.push_back(check_head("intent_head_stage1", m.hidden_dim, d.intents, HeadOutput::sigmoid, n, 47, opt));
  out.push_back(check_head("slot_head_stage1", m.hidden_dim, d.slots, HeadOutput::softmax, n, 53, opt));
  out.push_back(check_bilstm("intent_aware_bilstm", d.intents + m.hidden_dim, m.hidden_dim, n, 59, opt));
  out.push_back(check_hgat("s2i_hgat_stack", build_s2i_graph(n, m.window), m, 61, opt));
  out.push_back(check_hgat("i2s_hgat_stack", build_i2s_graph(n, m.window, 2), m, 67, opt));
  out.push_back(check_full_objective(d, opt));
  return out;
}

}  // namespace coguide
