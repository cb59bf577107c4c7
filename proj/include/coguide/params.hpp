#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coguide/matrix.hpp"

namespace coguide {

using Rng = std::mt19937_64;

// A trainable array. The gradient is absent until a backward pass reaches it.
template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  std::optional<Matrix<T>> grad;

  Matrix<T>& grad_buffer() {
    if (!grad) grad.emplace(value.rows(), value.cols());
    return *grad;
  }
};

enum class Init {
  uniform_fan_in,    // U(-1/sqrt(rows), 1/sqrt(rows)); rows = fan-in for x*W
  zeros,             // biases
  normal_embedding,  // N(0, 0.1)
};

// Named registry of every trainable array in a model. Addresses are stable.
template <class T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter<T>& add(const std::string& name, std::size_t rows, std::size_t cols, Init init,
                    Rng& rng) {
    if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Matrix<T>(rows, cols);
    switch (init) {
      case Init::zeros:
        break;
      case Init::uniform_fan_in: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : p->value.values()) v = static_cast<T>(dist(rng));
        break;
      }
      case Init::normal_embedding: {
        std::normal_distribution<double> dist(0.0, 0.1);
        for (auto& v : p->value.values()) v = static_cast<T>(dist(rng));
        break;
      }
    }
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw ContractError("unknown parameter '" + name + "'");
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.reset();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Snapshot of all values, in registration order.
  std::vector<Matrix<T>> snapshot() const {
    std::vector<Matrix<T>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Matrix<T>>& values) {
    if (values.size() != params_.size()) throw ContractError("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].shape() != params_[i]->value.shape()) {
        throw DimensionError("snapshot: shape mismatch for '" + params_[i]->name + "'");
      }
      params_[i]->value = values[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace coguide
