#pragma once

// Flat key=value configuration. Blank lines and lines starting with '#' are
// ignored; later assignments override earlier ones.

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "coguide/corpus.hpp"
#include "coguide/loss.hpp"
#include "coguide/model.hpp"
#include "coguide/optim.hpp"

namespace coguide {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  ModelConfig model;
  LossCoefficients loss;
  AdamConfig adam;
  std::size_t epochs = 300;
  std::size_t batch = 16;  // utterances per optimizer step (gradient accumulation)
  std::uint64_t seed = 1;
  std::size_t min_freq = 1;

  // Full-scale widths (256-dim embeddings and hidden states).
  static TrainConfig full_scale() {
    TrainConfig c;
    c.model.embedding_dim = c.model.lstm_dim = c.model.attention_dim = c.model.hidden_dim = 256;
    return c;
  }

  void validate() const {
    if (!(loss.gamma >= 0.0 && loss.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(loss.beta_intent >= 0.0) || !(loss.beta_slot >= 0.0)) throw ConfigError("beta coefficients must be >= 0");
    if (model.heads == 0 || model.hidden_dim % model.heads != 0) {
      throw ConfigError("hidden_dim must be divisible by heads");
    }
    if (model.hidden_dim % 2 != 0 || model.lstm_dim % 2 != 0) throw ConfigError("BiLSTM widths must be even");
    if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (model.layers == 0) throw ConfigError("layers must be >= 1");
    if (model.window < 0) throw ConfigError("window must be >= 0");
    if (batch == 0) throw ConfigError("batch must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(adam.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  }
};

namespace detail {

template <class V>
V parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  V v{};
  if constexpr (std::is_same_v<V, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + text + "'");
  } else {
    if constexpr (std::is_unsigned_v<V>) {
      if (!text.empty() && text[0] == '-') throw ConfigError("config: '" + key + "' must be non-negative");
    }
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) {
      throw ConfigError("config: bad value for '" + key + "': '" + text + "'");
    }
    return v;
  }
}

template <class F>
void for_each_field(TrainConfig& c, F&& f) {
  f("embedding_dim", c.model.embedding_dim);
  f("lstm_dim", c.model.lstm_dim);
  f("attention_dim", c.model.attention_dim);
  f("hidden_dim", c.model.hidden_dim);
  f("heads", c.model.heads);
  f("layers", c.model.layers);
  f("window", c.model.window);
  f("leaky_slope", c.model.leaky_slope);
  f("vote_threshold", c.model.vote_threshold);
  f("dropout", c.model.dropout);
  f("collapse_relations", c.model.collapse_relations);
  f("s2i_guidance", c.model.s2i_guidance);
  f("i2s_guidance", c.model.i2s_guidance);
  f("gamma", c.loss.gamma);
  f("beta_intent", c.loss.beta_intent);
  f("beta_slot", c.loss.beta_slot);
  f("learning_rate", c.adam.learning_rate);
  f("weight_decay", c.adam.weight_decay);
  f("adam_beta1", c.adam.beta1);
  f("adam_beta2", c.adam.beta2);
  f("adam_epsilon", c.adam.epsilon);
  f("epochs", c.epochs);
  f("batch", c.batch);
  f("seed", c.seed);
  f("min_freq", c.min_freq);
}

}  // namespace detail

inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  bool found = false;
  detail::for_each_field(c, [&](const char* name, auto& field) {
    if (key == name) {
      field = detail::parse_value<std::decay_t<decltype(field)>>(key, value);
      found = true;
    }
  });
  if (!found) throw ConfigError("config: unknown key '" + key + "'");
}

inline std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
  std::map<std::string, std::string> out;
  auto copy = c;
  detail::for_each_field(copy, [&](const char* name, auto& field) {
    std::ostringstream s;
    using V = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<V, bool>) {
      s << (field ? "true" : "false");
    } else {
      s.precision(17);
      s << field;
    }
    out[name] = s.str();
  });
  return out;
}

inline std::string serialize_config(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : to_key_values(c)) out += k + "=" + v + "\n";
  return out;
}

inline void apply_config_text(TrainConfig& c, const std::string& text, const std::string& source = "<config>") {
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto s = std::string(detail::rstrip(line));
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos || s[first] == '#') continue;
    s = s.substr(first);
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(no) + ": expected key=value");
    auto key = std::string(detail::rstrip(s.substr(0, eq)));
    auto value = s.substr(eq + 1);
    value = value.substr(std::min(value.size(), value.find_first_not_of(" \t")));
    try {
      apply_setting(c, key, std::string(detail::rstrip(value)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

inline TrainConfig config_from_key_values(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) apply_setting(c, k, v);
  return c;
}

}  // namespace coguide
