#pragma once

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace coguide {

struct Span {
  std::size_t begin = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive
  std::string type;

  auto operator<=>(const Span&) const = default;
};

// BIO spans. A span is B-x followed by the maximal run of I-x; an I-x that
// does not continue a span of type x opens a new span (treated as B-x).
inline std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& t = tags[i];
    const bool begins = t.size() > 2 && t[0] == 'B' && t[1] == '-';
    const bool inside = t.size() > 2 && t[0] == 'I' && t[1] == '-';
    if (inside && open && spans.back().type == t.substr(2)) {
      spans.back().end = i + 1;
      continue;
    }
    open = false;
    if (begins || inside) {
      spans.push_back({i, i + 1, t.substr(2)});
      open = true;
    }
  }
  return spans;
}

struct PrfCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  PrfCounts& operator+=(const PrfCounts& o) {
    gold += o.gold;
    predicted += o.predicted;
    correct += o.correct;
    return *this;
  }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Both sets empty counts as perfect agreement.
inline Prf prf_from_counts(const PrfCounts& c) {
  if (c.gold == 0 && c.predicted == 0) return {1.0, 1.0, 1.0};
  Prf r;
  r.precision = c.predicted ? static_cast<double>(c.correct) / static_cast<double>(c.predicted) : 0.0;
  r.recall = c.gold ? static_cast<double>(c.correct) / static_cast<double>(c.gold) : 0.0;
  r.f1 = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

inline PrfCounts span_counts(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument("slot_span_f1: sequence lengths differ (" + std::to_string(pred.size()) +
                                " vs " + std::to_string(gold.size()) + ")");
  }
  const auto ps = extract_spans(pred);
  const auto gs = extract_spans(gold);
  PrfCounts c;
  c.predicted = ps.size();
  c.gold = gs.size();
  std::set<Span> gold_set(gs.begin(), gs.end());
  for (const auto& s : ps) c.correct += gold_set.count(s);
  return c;
}

// Token-level diagnostic: a non-O token counts as correct when its tag matches exactly.
inline PrfCounts token_counts(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("token_f1: sequence lengths differ");
  PrfCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != "O") ++c.predicted;
    if (gold[i] != "O") ++c.gold;
    if (pred[i] != "O" && pred[i] == gold[i]) ++c.correct;
  }
  return c;
}

// Micro-averaged span P/R/F1 over a corpus.
inline Prf slot_span_f1(const std::vector<std::vector<std::string>>& pred,
                        const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("slot_span_f1: corpus sizes differ");
  PrfCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) c += span_counts(pred[i], gold[i]);
  return prf_from_counts(c);
}

// Fraction of utterances whose predicted intent set equals the gold set.
inline double intent_accuracy(const std::vector<std::vector<std::string>>& pred,
                              const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("intent_accuracy: corpus sizes differ");
  if (pred.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::set<std::string> a(pred[i].begin(), pred[i].end()), b(gold[i].begin(), gold[i].end());
    ok += a == b;
  }
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

struct UtteranceResult {
  std::vector<std::string> tokens;
  std::vector<std::string> gold_slots, pred_slots;
  std::vector<std::string> gold_intents, pred_intents;
  std::vector<std::string> stage0_slots, stage0_intents;

  bool intents_correct() const {
    return std::set<std::string>(gold_intents.begin(), gold_intents.end()) ==
           std::set<std::string>(pred_intents.begin(), pred_intents.end());
  }
  bool slots_correct() const { return gold_slots == pred_slots; }
};

// Fraction of utterances with an exact intent set and every slot tag right.
inline double overall_accuracy(const std::vector<UtteranceResult>& records) {
  if (records.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& r : records) ok += r.intents_correct() && r.slots_correct();
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

struct EvalReport {
  std::size_t utterances = 0;
  double intent_accuracy = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double token_f1 = 0.0;
  double slot_exact = 0.0;
  double overall_accuracy = 0.0;
  std::size_t gold_spans = 0;
  std::size_t predicted_spans = 0;
  std::size_t correct_spans = 0;

  bool operator==(const EvalReport&) const = default;
};

inline EvalReport evaluate_records(const std::vector<UtteranceResult>& records) {
  EvalReport rep;
  rep.utterances = records.size();
  if (records.empty()) return rep;
  PrfCounts spans, tokens;
  std::size_t intent_ok = 0, slot_ok = 0;
  for (const auto& r : records) {
    spans += span_counts(r.pred_slots, r.gold_slots);
    tokens += token_counts(r.pred_slots, r.gold_slots);
    intent_ok += r.intents_correct();
    slot_ok += r.slots_correct();
  }
  const double n = static_cast<double>(records.size());
  const auto s = prf_from_counts(spans);
  rep.intent_accuracy = intent_ok / n;
  rep.slot_precision = s.precision;
  rep.slot_recall = s.recall;
  rep.slot_f1 = s.f1;
  rep.token_f1 = prf_from_counts(tokens).f1;
  rep.slot_exact = slot_ok / n;
  rep.overall_accuracy = overall_accuracy(records);
  rep.gold_spans = spans.gold;
  rep.predicted_spans = spans.predicted;
  rep.correct_spans = spans.correct;
  return rep;
}

inline std::string format_table(const EvalReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "%-18s %10s\n"
                "%-18s %10zu\n"
                "%-18s %10.4f\n"
                "%-18s %10.4f\n"
                "%-18s %10.4f\n"
                "%-18s %10.4f\n"
                "%-18s %10.4f\n"
                "%-18s %10.4f\n"
                "%-18s %10.4f\n"
                "%-18s %10zu\n"
                "%-18s %10zu\n"
                "%-18s %10zu\n",
                "metric", "value", "utterances", r.utterances, "intent_accuracy", r.intent_accuracy,
                "slot_precision", r.slot_precision, "slot_recall", r.slot_recall, "slot_f1", r.slot_f1,
                "token_f1", r.token_f1, "slot_exact", r.slot_exact, "overall_accuracy", r.overall_accuracy,
                "gold_spans", r.gold_spans, "predicted_spans", r.predicted_spans, "correct_spans",
                r.correct_spans);
  return buf;
}

// One "key=value" per line; values printed with 17 significant digits.
inline std::string format_key_values(const EvalReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "utterances=" << r.utterances << '\n'
      << "intent_accuracy=" << r.intent_accuracy << '\n'
      << "slot_precision=" << r.slot_precision << '\n'
      << "slot_recall=" << r.slot_recall << '\n'
      << "slot_f1=" << r.slot_f1 << '\n'
      << "token_f1=" << r.token_f1 << '\n'
      << "slot_exact=" << r.slot_exact << '\n'
      << "overall_accuracy=" << r.overall_accuracy << '\n'
      << "gold_spans=" << r.gold_spans << '\n'
      << "predicted_spans=" << r.predicted_spans << '\n'
      << "correct_spans=" << r.correct_spans << '\n';
  return out.str();
}

}  // namespace coguide
