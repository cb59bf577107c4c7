#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "coguide/params.hpp"

namespace coguide {

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;  // decoupled: applied to the parameter, not the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
class AdamState {
 public:
  AdamState(const ParamStore<T>& store, AdamConfig config) : config_(config) {
    for (const auto& p : store) {
      first_.emplace_back(p->value.rows(), p->value.cols());
      second_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }
  const Matrix<double>& first_moment(std::size_t i) const { return first_[i]; }
  const Matrix<double>& second_moment(std::size_t i) const { return second_[i]; }

  // Updates every parameter in place from its gradient, then clears the
  // gradients. Every parameter must carry a gradient.
  void step(ParamStore<T>& store) {
    if (store.size() != first_.size()) throw ContractError("adam_step: parameter set changed");
    for (const auto& p : store) {
      if (!p->grad) throw ContractError("adam_step: parameter '" + p->name + "' has no gradient");
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    const double lr = config_.learning_rate;
    for (std::size_t k = 0; k < store.size(); ++k) {
      auto& p = store[k];
      auto& m = first_[k];
      auto& v = second_[k];
      if (m.shape() != p.value.shape()) throw DimensionError("adam_step: moment shape mismatch for '" + p.name + "'");
      const auto& g = *p.grad;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        double x = static_cast<double>(p.value[i]);
        x -= lr * config_.weight_decay * x;
        x -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
        p.value[i] = static_cast<T>(x);
      }
    }
    store.zero_grad();
  }

 private:
  AdamConfig config_;
  std::vector<Matrix<double>> first_;
  std::vector<Matrix<double>> second_;
  std::uint64_t step_ = 0;
};

template <class T>
void adam_step(ParamStore<T>& store, AdamState<T>& state) {
  state.step(store);
}

}  // namespace coguide
