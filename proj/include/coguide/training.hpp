#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coguide/config.hpp"
#include "coguide/corpus.hpp"
#include "coguide/loss.hpp"
#include "coguide/metrics.hpp"
#include "coguide/model.hpp"
#include "coguide/optim.hpp"

namespace coguide {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline LabelSpace label_space(const Vocabulary& v) { return {v.tokens.size(), v.num_intents(), v.num_slots()}; }

inline UtteranceResult make_result(const Utterance& gold, const PredictionRecord& p, const Vocabulary& v) {
  UtteranceResult r;
  r.tokens = gold.tokens;
  r.gold_slots = gold.slot_tags;
  r.gold_intents = normalize_intents(gold.intents);
  r.pred_slots = decode_slots(p.slots, v);
  r.pred_intents = decode_intents(p.intents, v);
  r.stage0_slots = decode_slots(p.stage0_slots, v);
  r.stage0_intents = decode_intents(p.stage0_intents, v);
  return r;
}

// Runs inference over `corpus`. Parameters are read-only here, so utterances
// are split across `workers` threads.
template <class T>
std::vector<UtteranceResult> predict_corpus(const CoGuidingNet<T>& net, const std::vector<Utterance>& corpus,
                                            const Vocabulary& v, std::size_t workers = 1) {
  std::vector<UtteranceResult> out(corpus.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = make_result(corpus[i], net.predict(encode_tokens(corpus[i].tokens, v)), v);
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, corpus.size()));
  if (workers == 1) {
    run(0, corpus.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (corpus.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(corpus.size(), b + chunk);
    if (b < e) pool.emplace_back(run, b, e);
  }
  for (auto& t : pool) t.join();
  return out;
}

template <class T>
EvalReport evaluate(const CoGuidingNet<T>& net, const std::vector<Utterance>& corpus, const Vocabulary& v,
                    std::size_t workers = 1) {
  return evaluate_records(predict_corpus(net, corpus, v, workers));
}

// Forward pass plus all loss terms for one encoded utterance.
template <class T>
LossParts<T> utterance_loss(const CoGuidingNet<T>& net, Tape<T>& tape, const EncodedUtterance& u,
                            const LossCoefficients& c, const Selections* forced = nullptr,
                            Rng* train_rng = nullptr) {
  auto [s1, s2] = net.forward_full(tape, u.token_ids, forced, train_rng);
  return compute_losses(s1.intent_probs, s2.intent_probs, s1.slot_probs, s2.slot_probs, u.intent_multihot,
                        u.slot_ids, c);
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  EvalReport dev;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  EvalReport best_dev;
};

inline std::string format_history(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch\tmean_loss\tdev_intent_accuracy\tdev_slot_f1\tdev_overall_accuracy\n";
  for (const auto& e : history) {
    out << e.epoch << '\t' << e.mean_loss << '\t' << e.dev.intent_accuracy << '\t' << e.dev.slot_f1 << '\t'
        << e.dev.overall_accuracy << '\n';
  }
  return out.str();
}

// Trains `net` in place. Each epoch shuffles the training set, accumulates
// gradients over `cfg.batch` utterances per Adam step (loss scaled by
// 1/batch), then scores the dev set. On return `net` holds the parameters of
// the epoch with the best dev overall accuracy (ties keep the earlier epoch).
template <class T>
TrainResult train(CoGuidingNet<T>& net, const TrainConfig& cfg, const std::vector<Utterance>& train_set,
                  const std::vector<Utterance>& dev_set, const Vocabulary& vocab,
                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw TrainingError("train: empty training corpus");
  const auto encoded = encode_corpus(train_set, vocab);
  auto& store = net.params();
  AdamState<T> adam(store, cfg.adam);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng dropout_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  Rng* drop = net.config().dropout > 0.0 ? &dropout_rng : nullptr;
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Matrix<T>> best = store.snapshot();
  bool have_best = false;
  const T inv_batch = T{1} / static_cast<T>(cfg.batch);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t pending = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      Tape<T> tape;
      auto parts = utterance_loss(net, tape, encoded[order[k]], cfg.loss, nullptr, drop);
      const double value = static_cast<double>(parts.total.value()[0]);
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", utterance index " +
                            std::to_string(order[k]) + " (intent=" + std::to_string(parts.intent.value()[0]) +
                            ", slot=" + std::to_string(parts.slot.value()[0]) + ")");
      }
      loss_sum += value;
      tape.backward(ops::scale(parts.total, inv_batch));
      if (++pending == cfg.batch || k + 1 == order.size()) {
        adam.step(store);
        pending = 0;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(order.size());
    rec.dev = evaluate(net, dev_set, vocab);
    if (!have_best || rec.dev.overall_accuracy > result.best_dev.overall_accuracy) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_dev = rec.dev;
      best = store.snapshot();
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  store.restore(best);
  return result;
}

}  // namespace coguide
