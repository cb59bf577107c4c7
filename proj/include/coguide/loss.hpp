#pragma once

// Training objective. The log-likelihood sums are negated so that the
// objective is minimized:
//   L_I    = -sum_{t,i,j} [ g log y + (1 - g) log(1 - y) ]   (token-level BCE, both stages)
//   L_S    = -sum_{t,i}   log y[gold]                       (NLL, both stages)
//   L^mp   =  sum over gold positions of max(0, y^{stage0} - y^{stage1})
//   L      =  gamma (L_I + beta_I L_I^mp) + (1 - gamma) (L_S + beta_S L_S^mp)

#include <span>
#include <vector>

#include "coguide/autodiff.hpp"

namespace coguide {

inline constexpr double kProbClamp = 1e-7;

struct LossCoefficients {
  double gamma = 0.9;
  double beta_intent = 1e-6;
  double beta_slot = 1.0;
};

template <class T>
struct LossParts {
  Tensor<T> intent;
  Tensor<T> slot;
  Tensor<T> intent_margin;
  Tensor<T> slot_margin;
  Tensor<T> total;
};

// Gold indicator with every row equal to the utterance's intent multi-hot.
template <class T>
Matrix<T> intent_targets(std::size_t n, std::span<const unsigned char> multihot) {
  Matrix<T> g(n, multihot.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < multihot.size(); ++j) g(i, j) = multihot[j] ? T{1} : T{0};
  return g;
}

template <class T>
Matrix<T> slot_targets(std::span<const int> gold, std::size_t num_slots) {
  Matrix<T> g(gold.size(), num_slots);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= num_slots) {
      throw DimensionError("slot_targets: gold id " + std::to_string(gold[i]) + " out of range");
    }
    g(i, gold[i]) = T{1};
  }
  return g;
}

namespace detail {
template <class T>
Tensor<T> bce(const Tensor<T>& probs, const Tensor<T>& gold) {
  const T eps = static_cast<T>(kProbClamp);
  auto y = ops::clamp(probs, eps, T{1} - eps);
  auto one_minus_y = ops::add_scalar(ops::scale(y, T{-1}), T{1});
  auto one_minus_g = ops::add_scalar(ops::scale(gold, T{-1}), T{1});
  auto ll = ops::add(ops::mul(gold, ops::log(y)), ops::mul(one_minus_g, ops::log(one_minus_y)));
  return ops::scale(ops::sum(ll), T{-1});
}

template <class T>
Tensor<T> nll(const Tensor<T>& probs, const Tensor<T>& gold) {
  const T eps = static_cast<T>(kProbClamp);
  auto y = ops::clamp(probs, eps, T{1});
  return ops::scale(ops::sum(ops::mul(gold, ops::log(y))), T{-1});
}
}  // namespace detail

template <class T>
Tensor<T> intent_loss(const Tensor<T>& stage0, const Tensor<T>& stage1, const Matrix<T>& gold) {
  auto g = stage0.tape().constant(gold);
  return ops::add(detail::bce(stage0, g), detail::bce(stage1, g));
}

template <class T>
Tensor<T> slot_loss(const Tensor<T>& stage0, const Tensor<T>& stage1, const Matrix<T>& gold) {
  auto g = stage0.tape().constant(gold);
  return ops::add(detail::nll(stage0, g), detail::nll(stage1, g));
}

template <class T>
Tensor<T> margin_penalty(const Tensor<T>& stage0, const Tensor<T>& stage1, const Matrix<T>& gold) {
  auto g = stage0.tape().constant(gold);
  return ops::sum(ops::mul(g, ops::relu(ops::sub(stage0, stage1))));
}

inline double total_loss(double intent, double intent_margin, double slot, double slot_margin,
                         const LossCoefficients& c) {
  return c.gamma * (intent + c.beta_intent * intent_margin) + (1.0 - c.gamma) * (slot + c.beta_slot * slot_margin);
}

template <class T>
Tensor<T> total_loss(const Tensor<T>& intent, const Tensor<T>& intent_margin, const Tensor<T>& slot,
                     const Tensor<T>& slot_margin, const LossCoefficients& c) {
  auto intent_side = ops::add(intent, ops::scale(intent_margin, static_cast<T>(c.beta_intent)));
  auto slot_side = ops::add(slot, ops::scale(slot_margin, static_cast<T>(c.beta_slot)));
  return ops::add(ops::scale(intent_side, static_cast<T>(c.gamma)),
                  ops::scale(slot_side, static_cast<T>(1.0 - c.gamma)));
}

template <class T>
LossParts<T> compute_losses(const Tensor<T>& intent0, const Tensor<T>& intent1, const Tensor<T>& slot0,
                            const Tensor<T>& slot1, std::span<const unsigned char> gold_intents,
                            std::span<const int> gold_slots, const LossCoefficients& c) {
  const auto gi = intent_targets<T>(intent0.rows(), gold_intents);
  const auto gs = slot_targets<T>(gold_slots, slot0.cols());
  LossParts<T> p;
  p.intent = intent_loss(intent0, intent1, gi);
  p.slot = slot_loss(slot0, slot1, gs);
  p.intent_margin = margin_penalty(intent0, intent1, gi);
  p.slot_margin = margin_penalty(slot0, slot1, gs);
  p.total = total_loss(p.intent, p.intent_margin, p.slot, p.slot_margin, c);
  return p;
}

}  // namespace coguide
