#pragma once

// Checkpoint container:
//
//   coguide-checkpoint\n
//   format-version 1\n
//   header-bytes <N>\n
//   <N bytes of JSON: config, vocabularies, tensor table>
//   <payload: every tensor as little-endian IEEE-754 float32, row-major>
//
// The tensor table lists {name, shape: [rows, cols], offset} with offsets in
// bytes from the start of the payload.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coguide/config.hpp"
#include "coguide/corpus.hpp"
#include "coguide/model.hpp"

namespace coguide {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointMagic = "coguide-checkpoint";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct NamedArray {
  std::string name;
  Matrix<float> value;
};

struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  std::vector<NamedArray> arrays;
};

namespace detail {

inline void put_f32_le(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

template <class T>
std::string serialize_checkpoint(const TrainConfig& cfg, const Vocabulary& vocab, const ParamStore<T>& params) {
  nlohmann::json header;
  header["config"] = to_key_values(cfg);
  header["vocab"] = {{"tokens", vocab.tokens.labels()},
                     {"slots", vocab.slots.labels()},
                     {"intents", vocab.intents.labels()}};
  std::string payload;
  auto tensors = nlohmann::json::array();
  for (const auto& p : params) {
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"offset", payload.size()}});
    for (auto v : p->value.values()) detail::put_f32_le(payload, static_cast<float>(v));
  }
  header["tensors"] = tensors;
  header["payload_bytes"] = payload.size();
  const std::string h = header.dump();
  std::string out = std::string(kCheckpointMagic) + "\nformat-version " + std::to_string(kCheckpointVersion) +
                    "\nheader-bytes " + std::to_string(h.size()) + "\n";
  out += h;
  out += payload;
  return out;
}

template <class T>
void save_checkpoint(const std::string& path, const TrainConfig& cfg, const Vocabulary& vocab,
                     const ParamStore<T>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(cfg, vocab, params);
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& source = "<checkpoint>") {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos || nl - pos > 256) throw CheckpointError(source + ": truncated or not a checkpoint");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) throw CheckpointError(source + ": not a coguide checkpoint");
  const std::string ver = next_line();
  if (ver.rfind("format-version ", 0) != 0) throw CheckpointError(source + ": missing format-version");
  if (ver != "format-version " + std::to_string(kCheckpointVersion)) {
    throw CheckpointVersionError(source + ": unsupported checkpoint " + ver + " (expected format-version " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const std::string hb = next_line();
  std::size_t header_bytes = 0;
  try {
    if (hb.rfind("header-bytes ", 0) != 0) throw std::invalid_argument("x");
    header_bytes = std::stoull(hb.substr(13));
  } catch (const std::exception&) {
    throw CheckpointError(source + ": malformed header-bytes line");
  }
  if (pos + header_bytes > bytes.size()) throw CheckpointError(source + ": truncated header");
  nlohmann::json header;
  Checkpoint ck;
  std::size_t payload_bytes = 0;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_bytes));
    ck.config = config_from_key_values(header.at("config").get<std::map<std::string, std::string>>());
    const auto& v = header.at("vocab");
    ck.vocab.tokens = LabelMap(v.at("tokens").get<std::vector<std::string>>());
    ck.vocab.slots = LabelMap(v.at("slots").get<std::vector<std::string>>());
    ck.vocab.intents = LabelMap(v.at("intents").get<std::vector<std::string>>());
    payload_bytes = header.at("payload_bytes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(source + ": corrupt header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(source + ": corrupt config: " + e.what());
  }
  pos += header_bytes;
  if (bytes.size() - pos != payload_bytes) throw CheckpointError(source + ": payload size mismatch");
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  try {
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<std::size_t>();
      const auto cols = t.at("shape").at(1).get<std::size_t>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + rows * cols * 4 > payload_bytes) throw CheckpointError(source + ": tensor extends past payload");
      NamedArray a{t.at("name").get<std::string>(), Matrix<float>(rows, cols)};
      for (std::size_t i = 0; i < rows * cols; ++i) a.value[i] = detail::get_f32_le(payload + offset + 4 * i);
      ck.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(source + ": corrupt tensor table: " + e.what());
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error&) {
    throw CheckpointError("cannot open checkpoint '" + path + "'");
  }
  return parse_checkpoint(bytes, path);
}

// Rebuilds the network described by a checkpoint and installs its arrays.
template <class T>
std::unique_ptr<CoGuidingNet<T>> restore_model(const Checkpoint& ck) {
  auto net = std::make_unique<CoGuidingNet<T>>(ck.config.model,
                                               LabelSpace{ck.vocab.tokens.size(), ck.vocab.num_intents(),
                                                          ck.vocab.num_slots()},
                                               ck.config.seed);
  auto& store = net->params();
  if (store.size() != ck.arrays.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ck.arrays.size()) + " arrays, model expects " +
                          std::to_string(store.size()));
  }
  for (const auto& a : ck.arrays) {
    auto* p = store.find(a.name);
    if (!p) throw CheckpointError("checkpoint array '" + a.name + "' is not a model parameter");
    if (p->value.shape() != a.value.shape()) {
      throw CheckpointError("checkpoint array '" + a.name + "' has shape " + a.value.shape().str() +
                            ", model expects " + p->value.shape().str());
    }
    p->value = a.value.template cast<T>();
  }
  return net;
}

}  // namespace coguide
