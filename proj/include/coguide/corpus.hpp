#pragma once

// Corpus block format (one utterance per block, blocks separated by a blank line):
//
//   listen B-action
//   to O
//   rock B-genre
//   AddToPlaylist#PlayMusic
//
// Token lines are "token<space>tag"; the last line carries the intents joined by '#'.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coguide/matrix.hpp"
#include "coguide/params.hpp"

namespace coguide {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Utterance {
  std::vector<std::string> tokens;
  std::vector<std::string> slot_tags;
  std::vector<std::string> intents;  // sorted, duplicate-free

  bool operator==(const Utterance&) const = default;
};

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view rstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> normalize_intents(std::vector<std::string> intents) {
  std::sort(intents.begin(), intents.end());
  intents.erase(std::unique(intents.begin(), intents.end()), intents.end());
  return intents;
}

// "O", "B-x" or "I-x" with a non-empty type.
inline bool is_valid_tag(std::string_view tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

// No I-x unless the previous tag is B-x or I-x.
inline bool is_well_formed_bio(const std::vector<std::string>& tags) {
  std::string prev = "O";
  for (const auto& t : tags) {
    if (!is_valid_tag(t)) return false;
    if (t[0] == 'I' && (prev == "O" || prev.substr(2) != t.substr(2))) return false;
    prev = t;
  }
  return true;
}

// Splits text into blocks of (line number, line) with CRLF normalized.
inline std::vector<std::vector<std::pair<std::size_t, std::string>>> split_blocks(const std::string& text) {
  std::vector<std::vector<std::pair<std::size_t, std::string>>> blocks;
  std::vector<std::pair<std::size_t, std::string>> cur;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto trimmed = detail::rstrip(line);
    if (trimmed.empty()) {
      if (!cur.empty()) blocks.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.emplace_back(lineno, std::string(trimmed));
  }
  if (!cur.empty()) blocks.push_back(std::move(cur));
  return blocks;
}

inline std::vector<Utterance> parse_corpus_text(const std::string& text, const std::string& source = "<text>") {
  std::vector<Utterance> out;
  for (const auto& block : split_blocks(text)) {
    const auto& [intent_line_no, intent_line] = block.back();
    auto intent_fields = detail::split_ws(intent_line);
    if (intent_fields.size() != 1) {
      throw ParseError(source, intent_line_no, "missing intent line (expected one '#'-joined field)");
    }
    if (block.size() < 2) {
      throw ParseError(source, intent_line_no, "block has no token lines");
    }
    Utterance u;
    for (std::size_t k = 0; k + 1 < block.size(); ++k) {
      const auto& [no, line] = block[k];
      auto f = detail::split_ws(line);
      if (f.size() != 2) {
        throw ParseError(source, no, "expected 'token tag', got " + std::to_string(f.size()) + " field(s)");
      }
      if (!is_valid_tag(f[1])) throw ParseError(source, no, "malformed slot tag '" + f[1] + "'");
      u.tokens.push_back(std::move(f[0]));
      u.slot_tags.push_back(std::move(f[1]));
    }
    for (auto& i : detail::split_on(intent_fields[0], '#')) {
      if (i.empty()) throw ParseError(source, intent_line_no, "empty intent label");
      u.intents.push_back(std::move(i));
    }
    u.intents = normalize_intents(std::move(u.intents));
    out.push_back(std::move(u));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<Utterance> parse_corpus(const std::string& path) {
  return parse_corpus_text(read_file(path), path);
}

inline std::string serialize_corpus(const std::vector<Utterance>& corpus) {
  std::string out;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto& u = corpus[k];
    if (k) out += '\n';
    for (std::size_t i = 0; i < u.tokens.size(); ++i) out += u.tokens[i] + ' ' + u.slot_tags[i] + '\n';
    for (std::size_t i = 0; i < u.intents.size(); ++i) out += (i ? "#" : "") + u.intents[i];
    out += '\n';
  }
  return out;
}

inline void write_corpus(const std::string& path, const std::vector<Utterance>& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << serialize_corpus(corpus);
}

// Dense label <-> id map.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) ids_[labels_[i]] = static_cast<int>(i);
  }
  int id(const std::string& label) const {
    auto it = ids_.find(label);
    return it == ids_.end() ? -1 : it->second;
  }
  bool contains(const std::string& label) const { return ids_.count(label) != 0; }
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  bool operator==(const LabelMap& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> ids_;
};

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static inline const std::string kPadToken = "<pad>";
  static inline const std::string kUnkToken = "<unk>";

  LabelMap tokens;
  LabelMap slots;
  LabelMap intents;

  std::size_t num_intents() const { return intents.size(); }
  std::size_t num_slots() const { return slots.size(); }
  bool operator==(const Vocabulary&) const = default;
};

namespace detail {

// Frequency-descending, then lexicographic.
inline std::vector<std::string> rank_by_frequency(const std::map<std::string, std::size_t>& counts,
                                                  std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [k, c] : counts)
    if (c >= min_freq) items.emplace_back(k, c);
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (auto& [k, c] : items) out.push_back(k);
  return out;
}

}  // namespace detail

inline Vocabulary build_vocab(const std::vector<Utterance>& train, std::size_t min_freq = 1) {
  if (train.empty()) throw std::invalid_argument("build_vocab: empty training corpus");
  std::map<std::string, std::size_t> tok, slot, intent;
  for (const auto& u : train) {
    for (const auto& t : u.tokens) ++tok[t];
    for (const auto& s : u.slot_tags) ++slot[s];
    for (const auto& i : u.intents) ++intent[i];
  }
  std::vector<std::string> tokens = {Vocabulary::kPadToken, Vocabulary::kUnkToken};
  for (auto& t : detail::rank_by_frequency(tok, std::max<std::size_t>(min_freq, 1))) {
    if (t != Vocabulary::kPadToken && t != Vocabulary::kUnkToken) tokens.push_back(std::move(t));
  }
  Vocabulary v;
  v.tokens = LabelMap(std::move(tokens));
  v.slots = LabelMap(detail::rank_by_frequency(slot, 1));
  v.intents = LabelMap(detail::rank_by_frequency(intent, 1));
  return v;
}

struct EncodedUtterance {
  std::vector<int> token_ids;
  std::vector<int> slot_ids;
  std::vector<unsigned char> intent_multihot;

  std::vector<int> intent_ids() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < intent_multihot.size(); ++i)
      if (intent_multihot[i]) out.push_back(static_cast<int>(i));
    return out;
  }
};

struct EncodeOptions {
  // Unknown gold labels throw when strict; otherwise unknown tags map to "O"
  // (or id 0), unknown intents are dropped, and a warning is recorded.
  bool strict = true;
  std::vector<std::string>* warnings = nullptr;
};

inline std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& v) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const int id = v.tokens.id(t);
    ids.push_back(id < 0 ? Vocabulary::kUnk : id);
  }
  return ids;
}

inline EncodedUtterance encode(const Utterance& u, const Vocabulary& v, EncodeOptions opt = {}) {
  EncodedUtterance e;
  e.token_ids = encode_tokens(u.tokens, v);
  auto warn = [&](const std::string& msg) {
    if (opt.strict) throw EncodeError(msg);
    if (opt.warnings) opt.warnings->push_back(msg);
  };
  for (const auto& s : u.slot_tags) {
    int id = v.slots.id(s);
    if (id < 0) {
      warn("unknown slot tag '" + s + "'");
      id = std::max(v.slots.id("O"), 0);
    }
    e.slot_ids.push_back(id);
  }
  e.intent_multihot.assign(v.num_intents(), 0);
  for (const auto& i : u.intents) {
    const int id = v.intents.id(i);
    if (id < 0) {
      warn("unknown intent '" + i + "'");
      continue;
    }
    e.intent_multihot[id] = 1;
  }
  return e;
}

inline std::vector<EncodedUtterance> encode_corpus(const std::vector<Utterance>& corpus, const Vocabulary& v,
                                                   EncodeOptions opt = {}) {
  std::vector<EncodedUtterance> out;
  out.reserve(corpus.size());
  for (const auto& u : corpus) out.push_back(encode(u, v, opt));
  return out;
}

inline std::vector<std::string> decode_slots(const std::vector<int>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(v.slots.label(id));
  return out;
}

inline std::vector<std::string> decode_intents(const std::vector<int>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(v.intents.label(id));
  return normalize_intents(std::move(out));
}

// Synthetic corpora with a built-in intent <-> slot dependency.
//
// Each intent owns a set of trigger words and the slot types t with
// t % num_intents == intent. An utterance with intents {a, b} contains one
// trigger per intent and one or two spans of slot types owned by each intent,
// shuffled among filler words. Slot values are drawn from per-type word lists
// (a head list for B- and a continuation list for I-), so every span implies its
// owning intent.
struct SyntheticSpec {
  std::size_t filler_words = 20;
  std::size_t num_intents = 4;
  std::size_t num_slot_types = 6;
  std::size_t words_per_slot = 1;
  std::size_t triggers_per_intent = 2;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  std::size_t max_intents = 2;
  std::size_t train_size = 32;
  std::size_t dev_size = 32;
  std::size_t test_size = 32;
  std::uint64_t seed = 1;
};

struct SyntheticCorpora {
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
};

namespace detail {

inline Utterance synth_one(const SyntheticSpec& s, Rng& rng) {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const std::size_t k = 1 + pick(std::min(s.max_intents, s.num_intents));
  std::vector<std::size_t> all(s.num_intents);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<std::size_t> chosen(all.begin(), all.begin() + k);
  std::sort(chosen.begin(), chosen.end());

  using Segment = std::vector<std::pair<std::string, std::string>>;
  std::vector<Segment> segments;
  for (auto intent : chosen) {
    segments.push_back({{"trig" + std::to_string(intent) + "_" + std::to_string(pick(s.triggers_per_intent)), "O"}});
    std::vector<std::size_t> owned;
    for (std::size_t t = intent; t < s.num_slot_types; t += s.num_intents) owned.push_back(t);
    if (owned.empty()) continue;
    const std::size_t spans = 1 + pick(std::min<std::size_t>(2, owned.size()));
    std::shuffle(owned.begin(), owned.end(), rng);
    for (std::size_t q = 0; q < spans; ++q) {
      const std::size_t type = owned[q];
      const std::string name = "slot" + std::to_string(type);
      Segment seg{{"val" + std::to_string(type) + "_" + std::to_string(pick(s.words_per_slot)), "B-" + name}};
      if (pick(2) == 1) {
        seg.emplace_back("cont" + std::to_string(type) + "_" + std::to_string(pick(s.words_per_slot)), "I-" + name);
      }
      segments.push_back(std::move(seg));
    }
  }
  std::shuffle(segments.begin(), segments.end(), rng);

  std::size_t content = 0;
  for (const auto& seg : segments) content += seg.size();
  const std::size_t target =
      std::max(content, s.min_length + pick(s.max_length - s.min_length + 1));
  // Distribute filler words into the gaps between segments.
  std::vector<std::size_t> gap(segments.size() + 1, 0);
  for (std::size_t f = content; f < target; ++f) ++gap[pick(gap.size())];

  Utterance u;
  auto filler = [&] {
    u.tokens.push_back("w" + std::to_string(pick(s.filler_words)));
    u.slot_tags.push_back("O");
  };
  for (std::size_t g = 0; g < segments.size(); ++g) {
    for (std::size_t f = 0; f < gap[g]; ++f) filler();
    for (auto& [tok, tag] : segments[g]) {
      u.tokens.push_back(tok);
      u.slot_tags.push_back(tag);
    }
  }
  for (std::size_t f = 0; f < gap.back(); ++f) filler();
  for (auto i : chosen) u.intents.push_back("Intent" + std::to_string(i));
  u.intents = normalize_intents(std::move(u.intents));
  return u;
}

}  // namespace detail

inline SyntheticCorpora generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_intents == 0) throw std::invalid_argument("generate_synthetic: need at least one intent");
  if (spec.filler_words == 0 || spec.words_per_slot == 0 || spec.triggers_per_intent == 0 ||
      spec.max_intents == 0 || spec.min_length > spec.max_length) {
    throw std::invalid_argument("generate_synthetic: degenerate spec");
  }
  Rng rng(spec.seed);
  SyntheticCorpora c;
  for (std::size_t i = 0; i < spec.train_size; ++i) c.train.push_back(detail::synth_one(spec, rng));
  for (std::size_t i = 0; i < spec.dev_size; ++i) c.dev.push_back(detail::synth_one(spec, rng));
  for (std::size_t i = 0; i < spec.test_size; ++i) c.test.push_back(detail::synth_one(spec, rng));
  return c;
}

}  // namespace coguide
