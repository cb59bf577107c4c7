#pragma once

// Two-stage co-guiding network.
//
//   stage 1: shared encoder -> task BiLSTMs -> token-level intent / slot heads,
//            then intent voting and slot argmax give label estimates.
//   stage 2: estimated slot labels join the intent features on the
//            slot-to-intent graph; estimated intents join the intent-aware slot
//            features on the intent-to-slot graph. Each graph runs its own
//            relation-aware attention stack before a fresh decoder head.
//
// Label selection is a hard stop-gradient: label embeddings receive gradients,
// the discrete choice does not.

#include <span>
#include <string>
#include <vector>

#include "coguide/autodiff.hpp"
#include "coguide/decoding.hpp"
#include "coguide/encoder.hpp"
#include "coguide/graph.hpp"
#include "coguide/hgat.hpp"

namespace coguide {

struct ModelConfig {
  std::size_t embedding_dim = 32;
  std::size_t lstm_dim = 32;       // shared encoder BiLSTM width (both directions)
  std::size_t attention_dim = 32;  // shared encoder self-attention width (d_k)
  std::size_t hidden_dim = 32;     // d: task features, graph nodes, label embeddings
  std::size_t heads = 4;
  std::size_t layers = 2;
  long window = 1;
  double leaky_slope = 0.2;
  double vote_threshold = 0.5;
  double dropout = 0.0;  // on embeddings and encoder output, training only
  bool collapse_relations = false;
  bool s2i_guidance = true;
  bool i2s_guidance = true;
};

struct LabelSpace {
  std::size_t vocab_size = 0;
  std::size_t num_intents = 0;
  std::size_t num_slots = 0;
};

template <class T>
struct Stage1Output {
  Tensor<T> intent_features;  // n x d
  Tensor<T> slot_features;    // n x d
  Tensor<T> intent_probs;     // n x N_I, sigmoid
  Tensor<T> slot_probs;       // n x N_S, row softmax
  std::vector<int> estimated_intents;
  std::vector<int> estimated_slots;
};

template <class T>
struct Stage2Output {
  Tensor<T> intent_probs;
  Tensor<T> slot_probs;
  std::vector<int> final_intents;
  std::vector<int> final_slots;
};

// Overrides for the stage-1 label choices (used to freeze them while probing gradients).
struct Selections {
  std::vector<int> slots;
  std::vector<int> intents;
};

struct PredictionRecord {
  Matrix<double> intent_probs0, slot_probs0, intent_probs1, slot_probs1;
  std::vector<int> stage0_intents, stage0_slots;
  std::vector<int> intents, slots;
};

template <class T>
class CoGuidingNet {
 public:
  CoGuidingNet(const ModelConfig& cfg, const LabelSpace& labels, std::uint64_t seed)
      : cfg_(cfg), labels_(labels) {
    if (labels.num_intents == 0 || labels.num_slots == 0 || labels.vocab_size == 0) {
      throw ContractError("model: empty vocabulary or label set");
    }
    Rng rng(seed);
    const T slope = static_cast<T>(cfg.leaky_slope);
    const std::size_t d = cfg.hidden_dim;
    const std::size_t relations = cfg.collapse_relations ? 1 : 4;
    encoder_ = SharedEncoder<T>(store_, {labels.vocab_size, cfg.embedding_dim, cfg.lstm_dim, cfg.attention_dim}, rng);
    intent_bilstm_ = Bilstm<T>(store_, "stage1.intent_bilstm", encoder_.output_dim(), d, rng);
    slot_bilstm_ = Bilstm<T>(store_, "stage1.slot_bilstm", encoder_.output_dim(), d, rng);
    intent_head0_ = MlpHead<T>(store_, "stage1.intent_head", d, d, labels.num_intents, HeadOutput::sigmoid, slope, rng);
    slot_head0_ = MlpHead<T>(store_, "stage1.slot_head", d, d, labels.num_slots, HeadOutput::softmax, slope, rng);
    if (cfg.s2i_guidance) {
      slot_label_embedding_ = &store_.add("stage2.slot_label_embedding", labels.num_slots, d, Init::normal_embedding, rng);
      s2i_hgat_ = HgatStack<T>(store_, "stage2.s2i_hgat", d, cfg.heads, relations, cfg.layers, slope, rng);
    }
    aware_bilstm_ = Bilstm<T>(store_, "stage2.intent_aware_bilstm", labels.num_intents + d, d, rng);
    if (cfg.i2s_guidance) {
      intent_label_embedding_ = &store_.add("stage2.intent_label_embedding", labels.num_intents, d, Init::normal_embedding, rng);
      i2s_hgat_ = HgatStack<T>(store_, "stage2.i2s_hgat", d, cfg.heads, relations, cfg.layers, slope, rng);
    }
    intent_head1_ = MlpHead<T>(store_, "stage2.intent_head", d, d, labels.num_intents, HeadOutput::sigmoid, slope, rng);
    slot_head1_ = MlpHead<T>(store_, "stage2.slot_head", d, d, labels.num_slots, HeadOutput::softmax, slope, rng);
  }

  CoGuidingNet(const CoGuidingNet&) = delete;
  CoGuidingNet& operator=(const CoGuidingNet&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const LabelSpace& labels() const { return labels_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  const SharedEncoder<T>& encoder() const { return encoder_; }
  const Bilstm<T>& intent_bilstm() const { return intent_bilstm_; }
  const Bilstm<T>& slot_bilstm() const { return slot_bilstm_; }
  const Bilstm<T>& intent_aware_bilstm_layer() const { return aware_bilstm_; }
  const MlpHead<T>& intent_head(int stage) const { return stage == 0 ? intent_head0_ : intent_head1_; }
  const MlpHead<T>& slot_head(int stage) const { return stage == 0 ? slot_head0_ : slot_head1_; }
  const HgatStack<T>& s2i_hgat() const { return s2i_hgat_; }
  const HgatStack<T>& i2s_hgat() const { return i2s_hgat_; }

  HeteroGraph s2i_graph(std::size_t n) const {
    auto g = build_s2i_graph(n, cfg_.window);
    return cfg_.collapse_relations ? collapse_to_homogeneous(g) : g;
  }
  HeteroGraph i2s_graph(std::size_t n, std::size_t m) const {
    auto g = build_i2s_graph(n, cfg_.window, m);
    return cfg_.collapse_relations ? collapse_to_homogeneous(g) : g;
  }

  // `train_rng` enables dropout; inference passes null.
  Stage1Output<T> stage1(Tape<T>& tape, std::span<const int> token_ids, Rng* train_rng = nullptr) const {
    if (token_ids.empty()) throw DimensionError("model: empty utterance");
    Stage1Output<T> out;
    auto h = encoder_(tape, token_ids, nullptr, cfg_.dropout, train_rng);
    if (train_rng) h = ops::dropout(h, cfg_.dropout, *train_rng);
    out.intent_features = intent_bilstm_(h);
    out.slot_features = slot_bilstm_(h);
    out.intent_probs = intent_head0_(out.intent_features);
    out.slot_probs = slot_head0_(out.slot_features);
    out.estimated_intents = intent_voting(out.intent_probs.value(), cfg_.vote_threshold);
    out.estimated_slots = slot_argmax(out.slot_probs.value());
    return out;
  }

  // Slot-guided intent decoding over the slot-to-intent graph.
  Tensor<T> s2i_decode(const Tensor<T>& intent_features, std::span<const int> estimated_slots) const {
    const std::size_t n = intent_features.rows();
    if (!cfg_.s2i_guidance) return intent_head1_(intent_features);
    if (estimated_slots.size() != n) throw DimensionError("s2i_decode: slot estimate count differs from n");
    auto& tape = intent_features.tape();
    auto nodes = ops::concat_rows({intent_features, ops::embedding(tape, *slot_label_embedding_, estimated_slots)});
    auto states = s2i_hgat_(nodes, s2i_graph(n));
    return intent_head1_(ops::slice_rows(states, 0, n));
  }

  // BiLSTM over y_i^{[I,0]} || h_i^{[S,0]}.
  Tensor<T> intent_aware_bilstm(const Tensor<T>& intent_probs, const Tensor<T>& slot_features) const {
    return aware_bilstm_(ops::concat_cols({intent_probs, slot_features}));
  }

  // Intent-guided slot decoding over the intent-to-slot graph.
  Tensor<T> i2s_decode(const Tensor<T>& aware_slot_states, std::span<const int> estimated_intents) const {
    const std::size_t n = aware_slot_states.rows();
    if (!cfg_.i2s_guidance) return slot_head1_(aware_slot_states);
    auto& tape = aware_slot_states.tape();
    Tensor<T> nodes = aware_slot_states;
    if (!estimated_intents.empty()) {
      nodes = ops::concat_rows({aware_slot_states, ops::embedding(tape, *intent_label_embedding_, estimated_intents)});
    }
    auto states = i2s_hgat_(nodes, i2s_graph(n, estimated_intents.size()));
    return slot_head1_(ops::slice_rows(states, 0, n));
  }

  std::pair<Stage1Output<T>, Stage2Output<T>> forward_full(Tape<T>& tape, std::span<const int> token_ids,
                                                           const Selections* forced = nullptr,
                                                           Rng* train_rng = nullptr) const {
    auto s1 = stage1(tape, token_ids, train_rng);
    const auto& slots = forced ? forced->slots : s1.estimated_slots;
    const auto& intents = forced ? forced->intents : s1.estimated_intents;
    Stage2Output<T> s2;
    s2.intent_probs = s2i_decode(s1.intent_features, slots);
    s2.slot_probs = i2s_decode(intent_aware_bilstm(s1.intent_probs, s1.slot_features), intents);
    s2.final_intents = intent_voting(s2.intent_probs.value(), cfg_.vote_threshold);
    s2.final_slots = slot_argmax(s2.slot_probs.value());
    return {std::move(s1), std::move(s2)};
  }

  PredictionRecord predict(std::span<const int> token_ids) const {
    Tape<T> tape;
    auto [s1, s2] = forward_full(tape, token_ids);
    PredictionRecord r;
    r.intent_probs0 = s1.intent_probs.value().template cast<double>();
    r.slot_probs0 = s1.slot_probs.value().template cast<double>();
    r.intent_probs1 = s2.intent_probs.value().template cast<double>();
    r.slot_probs1 = s2.slot_probs.value().template cast<double>();
    r.stage0_intents = s1.estimated_intents;
    r.stage0_slots = s1.estimated_slots;
    r.intents = s2.final_intents;
    r.slots = s2.final_slots;
    return r;
  }

 private:
  ModelConfig cfg_;
  LabelSpace labels_;
  ParamStore<T> store_;
  SharedEncoder<T> encoder_;
  Bilstm<T> intent_bilstm_, slot_bilstm_, aware_bilstm_;
  MlpHead<T> intent_head0_, slot_head0_, intent_head1_, slot_head1_;
  Parameter<T>* slot_label_embedding_ = nullptr;
  Parameter<T>* intent_label_embedding_ = nullptr;
  HgatStack<T> s2i_hgat_, i2s_hgat_;
};

}  // namespace coguide
