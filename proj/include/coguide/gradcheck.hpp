#pragma once

// Central finite-difference check of tape gradients at 64-bit precision.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coguide/autodiff.hpp"

namespace coguide {

struct ParamCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;  // over entries with gradient magnitude above the floor
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::string component;
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  double abs_floor = 1e-6;
};

// `build(tape)` must record a scalar loss that reads parameters from `store`.
// The numeric side is evaluated by `oracle_build` over `oracle_store`, which
// must register the same parameter names and shapes; its values are copied
// from `store` first. Entries where both gradients are within abs_floor of
// zero pass; every other entry needs |a - n| / max(|a|, |n|) <= tolerance.
template <class O, class Build, class OracleBuild>
GradCheckReport grad_check(const std::string& component, ParamStore<double>& store, Build&& build,
                           ParamStore<O>& oracle_store, OracleBuild&& oracle_build, GradCheckOptions opt = {}) {
  GradCheckReport report;
  report.component = component;
  report.tolerance = opt.tolerance;

  store.zero_grad();
  {
    Tape<double> tape;
    auto loss = build(tape);
    tape.backward(loss);
  }
  if (oracle_store.size() != store.size()) throw ContractError("grad_check: oracle store does not mirror store");
  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& src = store[k];
    auto& dst = oracle_store[k];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw ContractError("grad_check: oracle parameter mismatch at '" + src.name + "'");
    }
    dst.value = src.value.template cast<O>();
  }
  auto eval = [&] {
    Tape<O> tape;
    return oracle_build(tape).value()[0];
  };

  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& p = store[k];
    auto& q = oracle_store[k];
    ParamCheck pc;
    pc.name = p.name;
    pc.entries = p.value.size();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double analytic = p.grad ? (*p.grad)[i] : 0.0;
      const O saved = q.value[i];
      q.value[i] = saved + static_cast<O>(opt.step);
      const O up = eval();
      q.value[i] = saved - static_cast<O>(opt.step);
      const O down = eval();
      q.value[i] = saved;
      const double numeric = static_cast<double>((up - down) / (O{2} * static_cast<O>(opt.step)));
      const double abs_err = std::abs(analytic - numeric);
      pc.max_abs_error = std::max(pc.max_abs_error, abs_err);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      if (scale <= opt.abs_floor) continue;
      const double rel = abs_err / scale;
      pc.max_rel_error = std::max(pc.max_rel_error, rel);
      if (rel > opt.tolerance) pc.passed = false;
    }
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.passed = report.passed && pc.passed;
    report.params.push_back(std::move(pc));
  }
  store.zero_grad();
  return report;
}

// Same-precision variant: the oracle evaluates `build` on `store` itself.
template <class Build>
GradCheckReport grad_check(const std::string& component, ParamStore<double>& store, Build&& build,
                           GradCheckOptions opt = {}) {
  return grad_check(component, store, build, store, build, opt);
}

}  // namespace coguide
