// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "allo/error.hpp"
#include "allo/grad_check.hpp"
#include "allo/ops.hpp"
#include "allo/optim.hpp"
#include "allo/random.hpp"
#include "allo/tensor.hpp"

namespace allo {
namespace {

Gradients grads_of(const std::function<Tensor()>& fn) {
  GradTape tape;
  GradTape::Scope scope(tape);
  Tensor loss = fn();
  return backward(tape, loss);
}

TEST(Ops, MatmulIdentity) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor y = ops::matmul(a, eye);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  const Tensor y = ops::softmax(Tensor::vector({0, 0, 0}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, SigmoidOfZero) { EXPECT_EQ(ops::sigmoid(Tensor::scalar(0.0)).item(), 0.5); }

TEST(Ops, LogSigmoidIsStableForLargeInputs) {
  EXPECT_NEAR(ops::log_sigmoid(Tensor::scalar(-800.0)).item(), -800.0, 1e-9);
  EXPECT_NEAR(ops::log_sigmoid(Tensor::scalar(800.0)).item(), 0.0, 1e-300);
}

TEST(Ops, ShapeMismatchNamesOperation) {
  try {
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

TEST(Backward, QuadraticGradient) {
  Tensor theta = Tensor::vector({1.0, 2.0}, true);
  const Gradients g = grads_of([&] { return ops::sum(ops::mul(theta, theta)); });
  EXPECT_EQ(g.of(theta), (std::vector<double>{2.0, 4.0}));
}

TEST(Backward, ConstantLossHasZeroGradient) {
  Tensor theta = Tensor::vector({1.0, 2.0}, true);
  const Gradients g = grads_of([&] { return ops::sum(ops::scale(theta, 0.0)); });
  EXPECT_EQ(g.of(theta), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor theta = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW(grads_of([&] { return ops::mul(theta, theta); }), ContractError);
}

TEST(Backward, NoGradScopeRecordsNothing) {
  Tensor theta = Tensor::vector({1.0, 2.0}, true);
  GradTape tape;
  GradTape::Scope scope(tape);
  {
    NoGradScope off;
    const Tensor y = ops::sum(ops::mul(theta, theta));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(GradCheck, ScalarSquare) {
  std::vector<Tensor> params{Tensor::scalar(3.0, true)};
  const auto r = grad_check([&] { return ops::mul(params[0], params[0]); }, params, 1e-5);
  EXPECT_LE(r.max_relative_error, 1e-9);
}

TEST(GradCheck, RandomTwoLayerMlp) {
  Rng rng(4);
  auto randn = [&](Shape s) {
    std::vector<double> v(shape_size(s));
    for (double& x : v) x = rng.normal();
    return Tensor(s, v, true);
  };
  std::vector<Tensor> params{randn({3, 5}), randn({5}), randn({5, 2}), randn({2})};
  const Tensor x = Tensor({4, 3}, std::vector<double>{0.1, -0.3, 0.7, 1.2, 0.4, -0.9, 0.0, 0.5, 0.5, -1.1, 0.2, 0.3});
  auto loss = [&] {
    const Tensor h = ops::gelu(ops::add(ops::matmul(x, params[0]), params[1]));
    const Tensor y = ops::add(ops::matmul(h, params[2]), params[3]);
    return ops::mean(ops::mul(y, y));
  };
  EXPECT_LE(grad_check(loss, params, 1e-5).max_relative_error, 1e-5);
}

TEST(GradCheck, AbsAtZeroIsAKnownFailure) {
  // Central differences see 0 at the kink; the analytic subgradient does not.
  std::vector<Tensor> params{Tensor::scalar(0.0, true)};
  const auto r = grad_check([&] { return ops::abs(params[0]); }, params, 1e-5);
  EXPECT_GT(r.max_relative_error, 0.5);
}

TEST(GradCheck, NondeterministicLossIsAnOracleError) {
  std::vector<Tensor> params{Tensor::scalar(1.0, true)};
  int calls = 0;
  EXPECT_THROW(grad_check([&] { return ops::scale(params[0], ++calls); }, params, 1e-5), OracleError);
}

TEST(GradCheck, RejectsNonPositiveStep) {
  std::vector<Tensor> params{Tensor::scalar(1.0, true)};
  EXPECT_THROW(grad_check([&] { return params[0]; }, params, 0.0), ContractError);
}

TEST(MaskedStep, HandExample) {
  std::vector<Tensor> params{Tensor::vector({1.0, 1.0})};
  Optimizer opt({OptimizerKind::sgd, 0.1}, params);
  const std::vector<std::vector<double>> grads{{0.5, 0.5}};
  opt.masked_step(params, grads, {{1, 0}});
  EXPECT_EQ(params[0][0], 0.95);
  EXPECT_EQ(params[0][1], 1.0);
}

TEST(MaskedStep, AllOneMaskIsPlainSgd) {
  std::vector<Tensor> params{Tensor::vector({0.3, -1.7, 2.5})};
  const std::vector<std::vector<double>> grads{{0.11, -0.4, 3.0}};
  Optimizer opt({OptimizerKind::sgd, 0.05}, params);
  opt.masked_step(params, grads, {{1, 1, 1}});
  const std::vector<double> want{0.3 - 0.05 * 0.11, -1.7 - 0.05 * -0.4, 2.5 - 0.05 * 3.0};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(params[0][i], want[i]);
}

TEST(MaskedStep, AllOneMaskEqualsUnmaskedAdam) {
  std::vector<Tensor> a{Tensor::vector({0.3, -1.7, 2.5})}, b{Tensor::vector({0.3, -1.7, 2.5})};
  Optimizer oa({OptimizerKind::adam, 0.01}, a), ob({OptimizerKind::adam, 0.01}, b);
  for (int t = 0; t < 5; ++t) {
    const std::vector<std::vector<double>> grads{{0.1 * t, -0.4, 3.0 - t}};
    oa.masked_step(a, grads, {{1, 1, 1}});
    ob.step(b, grads);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[0][i], b[0][i]);
}

TEST(MaskedStep, ZeroMaskFreezesValuesAndAdamMoments) {
  std::vector<Tensor> params{Tensor::vector({0.3, -1.7})};
  Optimizer opt({OptimizerKind::adam, 0.01}, params);
  for (int t = 0; t < 10; ++t) opt.masked_step(params, std::vector<std::vector<double>>{{1.0, 2.0}}, {{0, 1}});
  EXPECT_EQ(params[0][0], 0.3);
  EXPECT_EQ(opt.first_moments()[0][0], 0.0);
  EXPECT_EQ(opt.second_moments()[0][0], 0.0);
  EXPECT_NE(params[0][1], -1.7);
}

TEST(MaskedStep, LayoutMismatchIsContractError) {
  std::vector<Tensor> params{Tensor::vector({0.3, -1.7})};
  Optimizer opt({OptimizerKind::sgd, 0.01}, params);
  EXPECT_THROW(opt.masked_step(params, std::vector<std::vector<double>>{{1.0}}, {}), ContractError);
  EXPECT_THROW(opt.masked_step(params, std::vector<std::vector<double>>{{1.0, 1.0}}, {{1}}), ContractError);
}

TEST(MaskedStep, DeterministicAcrossRuns) {
  auto run = [] {
    std::vector<Tensor> params{Tensor::vector({0.3, -1.7, 0.9})};
    Optimizer opt({OptimizerKind::adam, 0.01}, params);
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
      opt.masked_step(params, std::vector<std::vector<double>>{{rng.normal(), rng.normal(), rng.normal()}},
                      {{1, 0, 1}});
    }
    return std::vector<double>(params[0].data().begin(), params[0].data().end());
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace allo
