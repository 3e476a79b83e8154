#include <gtest/gtest.h>

#include <cmath>

#include "adamtrack/bounds.hpp"
#include "adamtrack/optim.hpp"

using namespace adamtrack;

namespace {
Vec scalar(double x) { return Vec::Constant(1, x); }
}  // namespace

TEST(Adam, TwoStepUnrollConstantGradient) {
  // g = 2, beta = (0.9, 0.999): m_hat = 2 and v_hat = 4 at both steps.
  AdamState s({0.1, 0.9, 0.999, 1e-8}, 1);
  const auto proj = ProjectionSpec::none();
  auto r1 = adam_step(s, scalar(2.0), proj, scalar(0.0));
  EXPECT_NEAR(s.m[0], 0.2, 1e-15);
  EXPECT_NEAR(s.v[0], 0.004, 1e-15);
  EXPECT_NEAR(r1.m_hat[0], 2.0, 1e-14);
  EXPECT_NEAR(r1.v_hat[0], 4.0, 1e-12);
  EXPECT_NEAR(r1.theta[0], -0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  auto r2 = adam_step(s, scalar(2.0), proj, r1.theta);
  EXPECT_NEAR(s.m[0], 0.38, 1e-15);
  EXPECT_NEAR(s.v[0], 0.007996, 1e-15);
  EXPECT_NEAR(r2.theta[0], -0.2 * 2.0 / (2.0 + 1e-8), 1e-14);
  EXPECT_EQ(s.t, 2);
}

TEST(Adam, ZeroGradientLeavesIterate) {
  AdamState s({0.1, 0.9, 0.999, 1e-8}, 3);
  const Vec theta = Vec::LinSpaced(3, -1.0, 1.0);
  const auto r = adam_step(s, Vec::Zero(3), ProjectionSpec::none(), theta);
  EXPECT_EQ(r.theta, theta);
  EXPECT_EQ(s.t, 1);
}

TEST(Adam, BiasCorrectedMomentIsWeightedSum) {
  AdamState s({0.01, 0.8, 0.99, 1e-8}, 4);
  Rng rng = make_stream(9, 3);
  std::vector<Vec> grads;
  Vec theta = Vec::Zero(4);
  for (long t = 1; t <= 30; ++t) {
    grads.push_back(gaussian_vector(4, rng));
    const auto r = adam_step(s, grads.back(), ProjectionSpec::none(), theta);
    theta = r.theta;
    Vec m = Vec::Zero(4), v = Vec::Zero(4);
    for (long k = 0; k < t; ++k) {
      m += weight(t, k, 0.8) * grads[k];
      v += weight(t, k, 0.99) * grads[k].cwiseAbs2();
    }
    EXPECT_LT((r.m_hat - m).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.v_hat - v).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Adam, PreconditionerSandwichAndStepBound) {
  const double G = 3.0, eps = 0.1, alpha = 0.05;
  AdamState s({alpha, 0.9, 0.999, eps}, 6);
  Rng rng = make_stream(4, 3);
  Vec theta = Vec::Zero(6);
  for (int t = 0; t < 200; ++t) {
    Vec g = gaussian_vector(6, rng);
    g *= std::min(1.0, G / g.norm());
    const auto r = adam_step(s, g, ProjectionSpec::none(), theta);
    EXPECT_GE(r.precond.minCoeff(), 1.0 / (G + eps) - 1e-15);
    EXPECT_LE(r.precond.maxCoeff(), 1.0 / eps + 1e-12);
    EXPECT_LE((r.theta - theta).cwiseAbs().maxCoeff(), alpha * G / eps * (1 + 1e-12));
    theta = r.theta;
  }
}

TEST(Adam, RestartClearsState) {
  AdamState s({0.1, 0.9, 0.999, 1e-8}, 2);
  adam_step(s, Vec::Ones(2), ProjectionSpec::none(), Vec::Zero(2));
  s.restart();
  EXPECT_EQ(s.t, 0);
  EXPECT_EQ(s.m, Vec::Zero(2));
  EXPECT_EQ(s.v, Vec::Zero(2));
}

TEST(Adam, RejectsNonFiniteAndBadHyper) {
  AdamState s({0.1, 0.9, 0.999, 1e-8}, 2);
  Vec g = Vec::Ones(2);
  g[1] = NAN;
  EXPECT_THROW(adam_step(s, g, ProjectionSpec::none(), Vec::Zero(2)), NonFiniteError);
  EXPECT_THROW(AdamState({0.1, 1.0, 0.999, 1e-8}, 2), PreconditionError);
  EXPECT_THROW(AdamState({0.1, 0.9, 0.999, 0.0}, 2), PreconditionError);
}

TEST(Adam, PredictableProxy) {
  AdamState s({0.1, 0.9, 0.999, 1e-8}, 1);
  s.v[0] = 1.0;
  const Vec vt = predictable_second_moment(s, scalar(4.0));
  EXPECT_NEAR(vt[0], 1.003, 1e-15);
  const Vec p = predictable_preconditioner(s, scalar(4.0));
  EXPECT_NEAR(p[0], 1.0 / (std::sqrt(1.003) + 1e-8), 1e-15);
  EXPECT_THROW(predictable_preconditioner(s, scalar(-1.0)), PreconditionError);
}

TEST(Sgd, PlainStepIsExact) {
  const Vec theta = Vec::LinSpaced(5, -2.0, 2.0);
  const Vec g = Vec::LinSpaced(5, 1.0, 3.0);
  const Vec want = theta - 0.3 * g;
  EXPECT_EQ(sgd_step(theta, g, 0.3, ProjectionSpec::none()), want);
}

TEST(Sgd, ZeroMomentumMatchesSgdBitwise) {
  Rng rng = make_stream(1, 3);
  Vec a = gaussian_vector(7, rng), b = a, buf = Vec::Zero(7);
  const auto box = ProjectionSpec::box(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Vec g = gaussian_vector(7, rng);
    a = sgd_step(a, g, 0.1, box);
    const auto r = sgdm_step(b, g, 0.1, 0.0, buf, box);
    b = r.theta;
    buf = r.buffer;
    ASSERT_EQ(a, b);
  }
}

TEST(Sgd, HeavyBallRecursion) {
  const Vec theta = scalar(1.0);
  const auto r1 = sgdm_step(theta, scalar(2.0), 0.1, 0.5, scalar(0.0), ProjectionSpec::none());
  EXPECT_DOUBLE_EQ(r1.theta[0], 0.8);
  const auto r2 = sgdm_step(r1.theta, scalar(2.0), 0.1, 0.5, r1.buffer, ProjectionSpec::none());
  EXPECT_DOUBLE_EQ(r2.theta[0], 0.8 - 0.2 - 0.1);
  EXPECT_THROW(sgdm_step(theta, scalar(1.0), 0.1, 1.0, scalar(0.0), ProjectionSpec::none()),
               PreconditionError);
}

TEST(Projection, BoxClampAndValidation) {
  const Vec z = (Vec(4) << -3.0, -0.5, 0.5, 3.0).finished();
  const Vec p = metric_project(z, ProjectionSpec::box(-1.0, 1.0));
  EXPECT_EQ(p, (Vec(4) << -1.0, -0.5, 0.5, 1.0).finished());
  EXPECT_THROW(validate(ProjectionSpec::box(1.0, 1.0)), PreconditionError);
  EXPECT_THROW(validate(ProjectionSpec::metric_box(0.0, 1.0, Vec::Zero(2))),
               PreconditionError);
}

TEST(Projection, VariationalInequalityAndNonexpansive) {
  Rng rng = make_stream(8, 3);
  const auto box = ProjectionSpec::box(-0.5, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Vec z = 3.0 * gaussian_vector(5, rng);
    const Vec w = 3.0 * gaussian_vector(5, rng);
    const Vec pz = metric_project(z, box);
    const Vec y = metric_project(gaussian_vector(5, rng), box);
    EXPECT_LE((z - pz).dot(y - pz), 1e-12);
    EXPECT_LE((pz - metric_project(w, box)).norm(), (z - w).norm() + 1e-12);
  }
}

TEST(Projection, GradientMappingMatchesGridSearch) {
  // Coordinatewise: argmin_y g y + (y - theta)^2 / (2 alpha p) over [lo, hi].
  const double lo = -1.0, hi = 1.0, alpha = 0.5;
  const Vec theta = (Vec(3) << 0.9, -0.2, -1.0).finished();
  const Vec grad = (Vec(3) << -3.0, 0.4, 2.0).finished();
  const Vec p = (Vec(3) << 0.5, 2.0, 1.0).finished();
  const Vec g = projected_gradient_mapping(theta, grad, p, alpha,
                                           ProjectionSpec::box(lo, hi));
  for (Index j = 0; j < 3; ++j) {
    double best = INFINITY, arg = 0.0;
    for (int k = 0; k <= 200000; ++k) {
      const double y = lo + (hi - lo) * k / 200000.0;
      const double f = grad[j] * y + (y - theta[j]) * (y - theta[j]) / (2 * alpha * p[j]);
      if (f < best) best = f, arg = y;
    }
    EXPECT_NEAR(g[j], (theta[j] - arg) / alpha, 1e-4);
  }
  const Vec free = projected_gradient_mapping(theta, grad, p, alpha, ProjectionSpec::none());
  EXPECT_EQ(free, p.cwiseProduct(grad));
}

TEST(StepDecay, HalvingPlans) {
  const double a = 0.01;
  const auto p = build_step_decay_plan(8 * a, a, 0.5, 2.0, 1.0, 0.5);
  ASSERT_EQ(p.epochs(), 4);
  EXPECT_DOUBLE_EQ(p.alphas[1], 4.5 * a);
  EXPECT_DOUBLE_EQ(p.alphas[2], 2.75 * a);
  EXPECT_DOUBLE_EQ(p.alphas[3], 1.875 * a);
  EXPECT_EQ(build_step_decay_plan(2 * a, a, 0.5, 2.0, 1.0, 0.5).epochs(), 2);
  EXPECT_EQ(build_step_decay_plan(3 * a, a, 0.5, 2.0, 1.0, 0.5).epochs(), 3);
}

TEST(StepDecay, EpochLengths) {
  // Rates q_- mu alpha_k = 1.5, 1, 0.75.
  const auto p = build_step_decay_plan(3.0, 1.0, 0.5, 1.0, 1.0, 0.5);
  EXPECT_EQ(p.lengths, (std::vector<long>{2, 5, 6}));
  EXPECT_EQ(p.total_steps(), 13);
}

TEST(StepDecay, Preconditions) {
  EXPECT_THROW(build_step_decay_plan(1.0, 1.0, 0.5, 1.0, 2.0, 1.0), PreconditionError);
  EXPECT_THROW(build_step_decay_plan(1.0, 0.5, 0.5, 1.0, 1.0, 1.0), PreconditionError);
  EXPECT_THROW(build_step_decay_plan(1.0, 0.5, 0.5, 0.0, 2.0, 1.0), PreconditionError);
}
