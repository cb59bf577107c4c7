#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "coguide/autodiff.hpp"
#include "coguide/gradcheck.hpp"
#include "coguide/optim.hpp"

using namespace coguide;

namespace {

Matrix<double> rand_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix<double> m(r, c);
  for (auto& v : m.values()) v = d(rng);
  return m;
}

Parameter<double>& leaf(ParamStore<double>& s, const std::string& name, std::size_t r, std::size_t c, Rng& rng,
                        double lo = -1.0, double hi = 1.0) {
  auto& p = s.add(name, r, c, Init::zeros, rng);
  p.value = rand_matrix(r, c, rng, lo, hi);
  return p;
}

// Reduces any tensor to a scalar through a fixed random weighting.
Tensor<double> reduce(const Tensor<double>& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return ops::sum(ops::mul(y, y.tape().constant(rand_matrix(y.rows(), y.cols(), rng))));
}

using OpCase = std::function<Tensor<double>(Tape<double>&, ParamStore<double>&)>;

void expect_gradcheck(const std::string& name, std::size_t trials,
                      const std::function<void(ParamStore<double>&, Rng&)>& make, const OpCase& op) {
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    ParamStore<double> store;
    make(store, rng);
    auto report = grad_check(name, store, [&](Tape<double>& tape) { return reduce(op(tape, store)); });
    EXPECT_TRUE(report.passed) << name << " trial " << t << " max rel " << report.max_rel_error;
  }
}

}  // namespace

TEST(Tape, ParameterGradientAccumulatesAcrossUses) {
  ParamStore<double> store;
  Rng rng(1);
  auto& w = store.add("w", 1, 1, Init::zeros, rng);
  w.value[0] = 3.0;
  Tape<double> tape;
  auto a = tape.param(w);
  auto y = ops::mul(a, a);  // w^2
  auto z = ops::add(y, a);  // w^2 + w
  tape.backward(ops::sum(z));
  ASSERT_TRUE(w.grad.has_value());
  EXPECT_DOUBLE_EQ((*w.grad)[0], 7.0);
}

TEST(Tape, GradientsAccumulateOverTapesUntilCleared) {
  ParamStore<double> store;
  Rng rng(1);
  auto& w = store.add("w", 1, 2, Init::zeros, rng);
  w.value = Matrix<double>(1, 2, {1.0, 2.0});
  for (int k = 0; k < 2; ++k) {
    Tape<double> tape;
    tape.backward(ops::sum(ops::scale(tape.param(w), 2.0)));
  }
  EXPECT_DOUBLE_EQ((*w.grad)[0], 4.0);
  store.zero_grad();
  EXPECT_FALSE(w.grad.has_value());
}

TEST(Tape, SecondBackwardIsRejected) {
  Tape<double> tape;
  auto x = tape.constant(Matrix<double>(1, 1, {2.0}));
  auto y = ops::sum(ops::mul(x, x));
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Tape, NonScalarLossIsRejected) {
  Tape<double> tape;
  auto x = tape.constant(Matrix<double>(2, 1, {1.0, 2.0}));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Tape, MixingTapesIsRejected) {
  Tape<double> a, b;
  auto x = a.constant(Matrix<double>(1, 1, {1.0}));
  auto y = b.constant(Matrix<double>(1, 1, {1.0}));
  EXPECT_THROW(ops::add(x, y), ContractError);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Tape<double> tape;
  auto a = tape.constant(Matrix<double>(2, 3));
  auto b = tape.constant(Matrix<double>(2, 3));
  try {
    ops::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ops::add(a, tape.constant(Matrix<double>(3, 2))), DimensionError);
}

TEST(Ops, ForwardValues) {
  Tape<double> tape;
  auto a = tape.constant(Matrix<double>(2, 2, {1, 2, 3, 4}));
  auto b = tape.constant(Matrix<double>(2, 2, {5, 6, 7, 8}));
  EXPECT_EQ(ops::matmul(a, b).value(), Matrix<double>(2, 2, {19, 22, 43, 50}));
  EXPECT_EQ(ops::matmul_nt(a, b).value(), Matrix<double>(2, 2, {17, 23, 39, 53}));
  EXPECT_EQ(ops::concat_cols({a, b}).value(), Matrix<double>(2, 4, {1, 2, 5, 6, 3, 4, 7, 8}));
  EXPECT_EQ(ops::concat_rows({a, b}).value().row(3)[1], 8);
  EXPECT_EQ(ops::slice_cols(a, 1, 1).value(), Matrix<double>(2, 1, {2, 4}));
  EXPECT_EQ(ops::leaky_relu(tape.constant(Matrix<double>(1, 2, {-1.0, 2.0})), 0.2).value(),
            Matrix<double>(1, 2, {-0.2, 2.0}));
  const int idx[] = {1, 1, 0};
  EXPECT_EQ(ops::gather_rows(a, idx).value(), Matrix<double>(3, 2, {3, 4, 3, 4, 1, 2}));
}

TEST(Ops, SoftmaxRowsSumToOneAndAreStable) {
  Tape<double> tape;
  auto x = tape.constant(Matrix<double>(2, 3, {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0}));
  auto y = ops::softmax_rows(x).value();
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (auto v : y.row(r)) {
      EXPECT_TRUE(std::isfinite(v));
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(y(0, 2), std::exp(2.0) / (1 + std::exp(1.0) + std::exp(2.0)), 1e-12);
}

TEST(Ops, MaskedSoftmaxGivesZeroOutsideMask) {
  Tape<double> tape;
  Matrix<unsigned char> mask(2, 3, {1, 0, 1, 0, 1, 0});
  auto y = ops::masked_softmax_rows(tape.constant(Matrix<double>(2, 3, {0.0, 9.0, 0.0, 1.0, 2.0, 3.0})), mask);
  EXPECT_DOUBLE_EQ(y.value()(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y.value()(1, 1), 1.0);
}

TEST(Ops, SigmoidSaturatesWithoutOverflow) {
  Tape<double> tape;
  auto y = ops::sigmoid(tape.constant(Matrix<double>(1, 2, {-800.0, 800.0}))).value();
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
}

TEST(OpGradients, Matmul) {
  expect_gradcheck("matmul", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 4, r); leaf(s, "b", 4, 2, r); },
                   [](Tape<double>& t, auto& s) { return ops::matmul(t.param(s[0]), t.param(s[1])); });
}

TEST(OpGradients, MatmulNt) {
  expect_gradcheck("matmul_nt", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 4, r); leaf(s, "b", 5, 4, r); },
                   [](Tape<double>& t, auto& s) { return ops::matmul_nt(t.param(s[0]), t.param(s[1])); });
}

TEST(OpGradients, ElementwiseBinary) {
  expect_gradcheck("add_sub_mul", 3, [](auto& s, Rng& r) { leaf(s, "a", 2, 3, r); leaf(s, "b", 2, 3, r); },
                   [](Tape<double>& t, auto& s) {
                     auto a = t.param(s[0]), b = t.param(s[1]);
                     return ops::mul(ops::add(a, b), ops::sub(a, b));
                   });
}

TEST(OpGradients, AddRowScaleAddScalar) {
  expect_gradcheck("add_row", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 4, r); leaf(s, "b", 1, 4, r); },
                   [](Tape<double>& t, auto& s) {
                     return ops::add_scalar(ops::scale(ops::add_row(t.param(s[0]), t.param(s[1])), 1.7), 0.3);
                   });
}

TEST(OpGradients, Activations) {
  expect_gradcheck("sigmoid_tanh", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 3, r, -3, 3); },
                   [](Tape<double>& t, auto& s) {
                     auto a = t.param(s[0]);
                     return ops::add(ops::sigmoid(a), ops::tanh(a));
                   });
  // Keep inputs away from the kinks so the central difference is valid.
  expect_gradcheck("leaky_relu_relu", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 3, r, 0.05, 2.0); leaf(s, "b", 3, 3, r, -2.0, -0.05); },
                   [](Tape<double>& t, auto& s) {
                     auto a = t.param(s[0]), b = t.param(s[1]);
                     return ops::add(ops::leaky_relu(ops::concat_rows({a, b}), 0.2), ops::relu(ops::concat_rows({a, b})));
                   });
}

TEST(OpGradients, ClampLog) {
  expect_gradcheck("clamp_log", 3, [](auto& s, Rng& r) { leaf(s, "a", 2, 4, r, 0.1, 0.9); },
                   [](Tape<double>& t, auto& s) { return ops::log(ops::clamp(t.param(s[0]), 1e-7, 1.0)); });
}

TEST(OpGradients, ClampBlocksGradientOutsideRange) {
  ParamStore<double> s;
  Rng rng(1);
  auto& p = s.add("p", 1, 2, Init::zeros, rng);
  p.value = Matrix<double>(1, 2, {-1.0, 0.5});
  Tape<double> t;
  t.backward(ops::sum(ops::clamp(t.param(p), 0.0, 1.0)));
  EXPECT_EQ((*p.grad)[0], 0.0);
  EXPECT_EQ((*p.grad)[1], 1.0);
}

TEST(OpGradients, Reductions) {
  expect_gradcheck("sum_mean", 2, [](auto& s, Rng& r) { leaf(s, "a", 3, 2, r); },
                   [](Tape<double>& t, auto& s) {
                     auto a = t.param(s[0]);
                     return ops::concat_cols({ops::sum(a), ops::mean(ops::mul(a, a))});
                   });
}

TEST(OpGradients, Softmaxes) {
  expect_gradcheck("softmax_rows", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 5, r, -2, 2); },
                   [](Tape<double>& t, auto& s) { return ops::softmax_rows(t.param(s[0])); });
  Matrix<unsigned char> mask(3, 4, {1, 1, 0, 1, 0, 1, 0, 0, 1, 1, 1, 1});
  expect_gradcheck("masked_softmax_rows", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 4, r, -2, 2); },
                   [&](Tape<double>& t, auto& s) { return ops::masked_softmax_rows(t.param(s[0]), mask); });
}

TEST(OpGradients, ShapeOps) {
  expect_gradcheck("concat_slice", 3, [](auto& s, Rng& r) { leaf(s, "a", 3, 2, r); leaf(s, "b", 3, 3, r); leaf(s, "c", 1, 5, r); },
                   [](Tape<double>& t, auto& s) {
                     auto x = ops::concat_rows({ops::concat_cols({t.param(s[0]), t.param(s[1])}), t.param(s[2])});
                     return ops::slice_cols(ops::slice_rows(x, 1, 3), 1, 3);
                   });
  const int idx[] = {2, 0, 2};
  expect_gradcheck("gather_rows", 2, [](auto& s, Rng& r) { leaf(s, "a", 3, 2, r); },
                   [&](Tape<double>& t, auto& s) { return ops::gather_rows(t.param(s[0]), idx); });
}

TEST(OpGradients, EmbeddingScattersRepeatedIds) {
  const int ids[] = {1, 3, 1};
  expect_gradcheck("embedding", 2, [](auto& s, Rng& r) { leaf(s, "table", 4, 3, r); },
                   [&](Tape<double>& t, auto& s) { return ops::embedding(t, s[0], ids); });
  ParamStore<double> s;
  Rng rng(2);
  auto& table = leaf(s, "table", 4, 3, rng);
  Tape<double> t;
  t.backward(ops::sum(ops::embedding(t, table, ids)));
  EXPECT_EQ((*table.grad)(1, 0), 2.0);
  EXPECT_EQ((*table.grad)(0, 0), 0.0);
  EXPECT_EQ((*table.grad)(3, 2), 1.0);
}

TEST(OpGradients, EmbeddingRejectsOutOfRangeIds) {
  ParamStore<double> s;
  Rng rng(2);
  auto& table = leaf(s, "table", 4, 3, rng);
  Tape<double> t;
  const int bad[] = {4};
  EXPECT_THROW(ops::embedding(t, table, bad), DimensionError);
}

TEST(GradCheck, DetectsAWrongGradient) {
  ParamStore<double> store;
  Rng rng(5);
  leaf(store, "a", 2, 2, rng);
  // A deliberately wrong backward: reports twice the true derivative of sum(x).
  auto report = grad_check("broken", store, [&](Tape<double>& t) {
    auto x = t.param(store[0]);
    auto xi = x.id();
    auto y = t.record(x.value(), {xi}, [xi](Tape<double>& tp, std::size_t self) {
      if (auto* g = tp.grad_target(xi)) {
        const auto& gy = tp.grad_of(self);
        for (std::size_t i = 0; i < gy.size(); ++i) (*g)[i] += 2.0 * gy[i];
      }
    });
    return ops::sum(y);
  });
  EXPECT_FALSE(report.passed);
  EXPECT_NEAR(report.max_rel_error, 0.5, 1e-6);
}

TEST(GradCheck, TinyToleranceFails) {
  ParamStore<double> store;
  Rng rng(5);
  leaf(store, "a", 3, 3, rng);
  GradCheckOptions opt;
  opt.tolerance = 1e-15;
  opt.abs_floor = 0.0;
  auto report = grad_check("tight", store, [&](Tape<double>& t) { return reduce(ops::tanh(t.param(store[0]))); }, opt);
  EXPECT_FALSE(report.passed);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  ParamStore<double> store;
  Rng rng(1);
  auto& p = store.add("p", 1, 3, Init::zeros, rng);
  p.value = Matrix<double>(1, 3, {1.0, -2.0, 0.5});
  p.grad_buffer() = Matrix<double>(1, 3, {0.3, -4.0, 0.0});
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  AdamState<double> adam(store, cfg);
  adam.step(store);
  // m_hat = g and v_hat = g^2 after one step, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(p.value[0], 1.0 - 1e-3 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[1], -2.0 + 1e-3 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_DOUBLE_EQ(p.value[2], 0.5);
  EXPECT_FALSE(p.grad.has_value());
  EXPECT_EQ(adam.step_count(), 1u);
}

TEST(Adam, MatchesReferenceRecurrenceOverSeveralSteps) {
  ParamStore<double> store;
  Rng rng(1);
  auto& p = store.add("p", 1, 1, Init::zeros, rng);
  p.value[0] = 2.0;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  AdamState<double> adam(store, cfg);
  double x = 2.0, m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * x;  // d/dx x^2
    p.grad_buffer()[0] = g;
    adam.step(store);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x = x - 0.1 * 0.01 * x - 0.1 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.value[0], x, 1e-12) << "step " << t;
  }
}

TEST(Adam, MissingGradientNamesTheParameter) {
  ParamStore<double> store;
  Rng rng(1);
  store.add("has", 1, 1, Init::zeros, rng).grad_buffer();
  store.add("lacks", 1, 1, Init::zeros, rng);
  AdamState<double> adam(store, AdamConfig{});
  try {
    adam.step(store);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("lacks"), std::string::npos);
  }
}

TEST(ParamStore, DuplicateNamesAndSnapshots) {
  ParamStore<double> store;
  Rng rng(1);
  store.add("a", 2, 2, Init::uniform_fan_in, rng);
  EXPECT_THROW(store.add("a", 1, 1, Init::zeros, rng), ContractError);
  auto snap = store.snapshot();
  store[0].value.fill(9.0);
  store.restore(snap);
  EXPECT_EQ(store[0].value, snap[0]);
  for (auto v : store[0].value.values()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(2.0));
}

TEST(ParamStore, SameSeedSameInitialization) {
  auto make = [] {
    ParamStore<float> s;
    Rng rng(77);
    s.add("w", 4, 3, Init::uniform_fan_in, rng);
    s.add("e", 5, 2, Init::normal_embedding, rng);
    return s.snapshot();
  };
  EXPECT_EQ(make(), make());
}
