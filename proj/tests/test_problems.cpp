#include <gtest/gtest.h>

#include <cmath>

#include "adamtrack/problems.hpp"

using namespace adamtrack;

namespace adamtrack {
void PrintTo(ProblemKind kind, std::ostream* os) { *os << to_string(kind); }
}  // namespace adamtrack

namespace {

const ProblemKind kAllKinds[] = {
    ProblemKind::kQuadratic,         ProblemKind::kLeastSquares,
    ProblemKind::kMlpTeacherStudent, ProblemKind::kPhaseRetrieval,
    ProblemKind::kMatrixFactorization, ProblemKind::kLogisticLabelFlip,
    ProblemKind::kLasso};

ProblemSpec small(ProblemKind kind) {
  ProblemSpec s;
  s.kind = kind;
  switch (kind) {
    case ProblemKind::kQuadratic: s.d = 12; s.mu = 0.5; s.L = 3.0; break;
    case ProblemKind::kLeastSquares: s.d = 8; s.n = 16; break;
    case ProblemKind::kMlpTeacherStudent:
      s.d = 5; s.hidden = 4; s.pool_size = 32; s.val_size = 16; break;
    case ProblemKind::kPhaseRetrieval: s.d = 6; s.val_size = 32; break;
    case ProblemKind::kMatrixFactorization: s.n = 6; s.m = 5; s.rank = 2; break;
    case ProblemKind::kLogisticLabelFlip: s.d = 8; s.n = 30; s.rank = 3; break;
    case ProblemKind::kLasso: s.d = 10; s.n = 20; s.sparsity = 3; break;
  }
  return s;
}

std::unique_ptr<Problem> build(const ProblemSpec& s, std::uint64_t seed = 1) {
  Rng rng = make_stream(seed, 1);
  return make_problem(s, rng);
}

}  // namespace

class EveryKind : public ::testing::TestWithParam<ProblemKind> {};

TEST_P(EveryKind, SampleGradientIsUnbiased) {
  auto p = build(small(GetParam()));
  const double noise = GetParam() == ProblemKind::kLogisticLabelFlip ? 0.2 : 0.3;
  Rng rng = make_stream(2, 3);
  const Vec theta = p->target() + 0.3 * gaussian_vector(p->dim(), rng);
  const int n = 4000;
  Vec sum = Vec::Zero(p->dim()), sq = Vec::Zero(p->dim());
  Vec mean;
  for (int i = 0; i < n; ++i) {
    const auto g = sample_gradient(*p, theta, noise, 2, rng, i == 0);
    if (i == 0) mean = g.mean_grad;
    sum += g.grad;
    sq += g.grad.cwiseAbs2();
  }
  const Vec avg = sum / n;
  const Vec var = (sq / n - avg.cwiseAbs2()).cwiseMax(0.0);
  EXPECT_LT((mean - p->mean_gradient(theta)).norm(), 1e-12);
  for (Index j = 0; j < p->dim(); ++j) {
    const double se = std::sqrt(var[j] / n);
    EXPECT_LE(std::abs(avg[j] - mean[j]), 4.0 * se + 1e-12) << "coordinate " << j;
  }
}

TEST_P(EveryKind, NoiseDecomposition) {
  auto p = build(small(GetParam()));
  Rng rng = make_stream(3, 3);
  const Vec theta = p->initial_iterate();
  const auto g = sample_gradient(*p, theta, 0.1, 4, rng, true);
  EXPECT_LT((g.grad - g.mean_grad - g.noise).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_P(EveryKind, DeterministicConstruction) {
  auto a = build(small(GetParam()), 9), b = build(small(GetParam()), 9);
  EXPECT_EQ(a->target(), b->target());
  EXPECT_EQ(a->initial_iterate(), b->initial_iterate());
  const Vec x = a->initial_iterate() + Vec::Constant(a->dim(), 0.1);
  EXPECT_EQ(a->objective(x), b->objective(x));
}

TEST_P(EveryKind, ZeroDriftIsNoOp) {
  auto p = build(small(GetParam()));
  const Vec before = p->target();
  Rng rng = make_stream(1, 2);
  drift_problem(*p, 0.0, rng);
  EXPECT_EQ(p->target(), before);
  EXPECT_THROW(drift_problem(*p, -1.0, rng), PreconditionError);
}

TEST_P(EveryKind, SecondMomentMatchesMonteCarlo) {
  auto p = build(small(GetParam()));
  if (!p->exact_second_moment()) GTEST_SKIP() << "estimated, not closed-form";
  p->set_noise_level(GetParam() == ProblemKind::kLogisticLabelFlip ? 0.2 : 0.3);
  Rng rng = make_stream(5, 3), mc = make_stream(5, 4);
  const Vec theta = p->target() + 0.3 * gaussian_vector(p->dim(), rng);
  const Vec exact = p->second_moment(theta, 3, mc);
  Vec acc = Vec::Zero(p->dim());
  const int n = 20000;
  for (int i = 0; i < n; ++i) acc += p->sample_gradient(theta, 3, rng, false).grad.cwiseAbs2();
  acc /= n;
  for (Index j = 0; j < p->dim(); ++j) {
    EXPECT_NEAR(acc[j], exact[j], 0.06 * exact[j] + 1e-10) << "coordinate " << j;
  }
}

INSTANTIATE_TEST_SUITE_P(Problems, EveryKind, ::testing::ValuesIn(kAllKinds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Problems, DriftMovesTargetByDelta) {
  for (auto kind : {ProblemKind::kQuadratic, ProblemKind::kLeastSquares,
                    ProblemKind::kPhaseRetrieval, ProblemKind::kMatrixFactorization,
                    ProblemKind::kLogisticLabelFlip, ProblemKind::kLasso}) {
    auto p = build(small(kind));
    Rng rng = make_stream(4, 2);
    const Vec before = p->target();
    drift_problem(*p, 0.7, rng);
    EXPECT_NEAR((p->target() - before).norm(), 0.7, 1e-12) << to_string(kind);
  }
}

TEST(Problems, LassoDriftKeepsSupport) {
  auto p = build(small(ProblemKind::kLasso));
  Rng rng = make_stream(4, 2);
  std::vector<Index> zeros;
  for (Index j = 0; j < p->dim(); ++j) {
    if (p->target()[j] == 0.0) zeros.push_back(j);
  }
  EXPECT_EQ(zeros.size(), 7u);
  for (int t = 0; t < 20; ++t) drift_problem(*p, 0.5, rng);
  for (Index j : zeros) EXPECT_EQ(p->target()[j], 0.0);
}

TEST(Problems, MlpDriftHasFunctionSpaceRms) {
  auto p = build(small(ProblemKind::kMlpTeacherStudent));
  const Vec old = p->target();
  Rng rng = make_stream(4, 2);
  drift_problem(*p, 1e-4, rng);
  // The old teacher now misses the new one by the drift, to first order.
  EXPECT_NEAR(p->metric(old), 1e-8, 1e-10);
}

TEST(Problems, MetricsVanishAtTarget) {
  for (auto kind : {ProblemKind::kQuadratic, ProblemKind::kLeastSquares,
                    ProblemKind::kMlpTeacherStudent, ProblemKind::kPhaseRetrieval,
                    ProblemKind::kMatrixFactorization, ProblemKind::kLasso}) {
    auto p = build(small(kind));
    EXPECT_NEAR(p->metric(p->target()), 0.0, 1e-20) << to_string(kind);
  }
  auto pr = build(small(ProblemKind::kPhaseRetrieval));
  EXPECT_NEAR(pr->metric(-pr->target()), 0.0, 1e-20);
}

TEST(Problems, QuadraticHandValues) {
  auto p = build(small(ProblemKind::kQuadratic));
  const Vec theta = p->target() + Vec::Unit(p->dim(), 0);
  EXPECT_DOUBLE_EQ(p->metric(theta), 1.0);
  EXPECT_DOUBLE_EQ(p->tracking_error(theta), 1.0);
  const auto c = p->curvature();
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->mu, 0.5);
  EXPECT_EQ(c->L, 3.0);
}

TEST(Problems, WarmStartBeginsAtTarget) {
  for (auto kind : {ProblemKind::kMlpTeacherStudent, ProblemKind::kPhaseRetrieval,
                    ProblemKind::kQuadratic}) {
    ProblemSpec s = small(kind);
    s.warm_start = true;
    auto p = build(s);
    EXPECT_EQ(p->initial_iterate(), p->target());
    EXPECT_NEAR(p->metric(p->initial_iterate()), 0.0, 1e-20);
  }
}

TEST(Problems, LabelFlipRejectsHalf) {
  auto p = build(small(ProblemKind::kLogisticLabelFlip));
  EXPECT_NO_THROW(p->set_noise_level(0.49));
  EXPECT_THROW(p->set_noise_level(0.5), PreconditionError);
}

TEST(Problems, SpecValidation) {
  ProblemSpec s;
  s.kind = ProblemKind::kLeastSquares;
  s.d = 20;
  s.n = 10;
  EXPECT_THROW(resolve_defaults(s), PreconditionError);
  EXPECT_EQ(resolve_defaults(small(ProblemKind::kQuadratic)).init_scale, 1.0);
  EXPECT_EQ(parse_problem_kind("lasso"), ProblemKind::kLasso);
  EXPECT_THROW(parse_problem_kind("lassso"), PreconditionError);
}

TEST(Problems, DimensionChecked) {
  auto p = build(small(ProblemKind::kQuadratic));
  EXPECT_THROW(p->objective(Vec::Zero(3)), PreconditionError);
}
