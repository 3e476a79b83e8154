#include <string>

#include "adamtrack/problems.hpp"
#include "problems/kinds.hpp"

namespace adamtrack {

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kQuadratic: return "quadratic";
    case ProblemKind::kLeastSquares: return "least_squares";
    case ProblemKind::kMlpTeacherStudent: return "mlp_teacher_student";
    case ProblemKind::kPhaseRetrieval: return "phase_retrieval";
    case ProblemKind::kMatrixFactorization: return "matrix_factorization";
    case ProblemKind::kLogisticLabelFlip: return "logistic_labelflip";
    case ProblemKind::kLasso: return "lasso";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(std::string_view name) {
  for (auto k : {ProblemKind::kQuadratic, ProblemKind::kLeastSquares,
                 ProblemKind::kMlpTeacherStudent, ProblemKind::kPhaseRetrieval,
                 ProblemKind::kMatrixFactorization,
                 ProblemKind::kLogisticLabelFlip, ProblemKind::kLasso}) {
    if (to_string(k) == name) return k;
  }
  throw PreconditionError("unknown problem kind '" + std::string(name) + "'");
}

ProblemSpec resolve_defaults(ProblemSpec s) {
  auto dflt = [](auto& field, auto value) {
    if (field == 0) field = value;
  };
  switch (s.kind) {
    case ProblemKind::kQuadratic:
      dflt(s.d, 100);
      dflt(s.mu, 0.01);
      dflt(s.L, s.mu);
      dflt(s.init_scale, 1.0);
      break;
    case ProblemKind::kLeastSquares:
      dflt(s.d, 50);
      dflt(s.n, 100);
      dflt(s.mu, 1.0);
      dflt(s.L, 10.0);
      dflt(s.init_scale, 1.0);
      if (s.n < s.d) throw PreconditionError("least squares needs n >= d");
      break;
    case ProblemKind::kMlpTeacherStudent:
      dflt(s.d, 100);
      dflt(s.hidden, 128);
      dflt(s.val_size, 1024);
      dflt(s.pool_size, 8192);
      dflt(s.init_scale, 0.04);
      break;
    case ProblemKind::kPhaseRetrieval:
      dflt(s.d, 50);
      dflt(s.val_size, 1024);
      dflt(s.init_scale, 1.0);
      dflt(s.start_scale, 0.1);  // zero is a stationary point
      if (s.metric.empty()) s.metric = "prediction";
      if (s.metric != "prediction" && s.metric != "stationarity") {
        throw PreconditionError("phase retrieval metric must be prediction or stationarity");
      }
      break;
    case ProblemKind::kMatrixFactorization:
      dflt(s.n, 60);
      dflt(s.m, 60);
      dflt(s.rank, 5);
      dflt(s.init_scale, 1.0);
      dflt(s.start_scale, 0.1);
      break;
    case ProblemKind::kLogisticLabelFlip:
      dflt(s.d, 100);
      dflt(s.n, 1000);
      dflt(s.rank, 20);
      dflt(s.init_scale, 1.0);
      if (s.rank > s.d) throw PreconditionError("logistic rank must be <= d");
      break;
    case ProblemKind::kLasso:
      dflt(s.d, 100);
      dflt(s.n, 200);
      dflt(s.sparsity, 10);
      dflt(s.lambda, 0.02);
      dflt(s.init_scale, 1.0);
      if (s.sparsity > s.d) throw PreconditionError("lasso sparsity must be <= d");
      break;
  }
  if (s.mu < 0.0 || s.L < s.mu) {
    throw PreconditionError("curvature range requires 0 <= mu <= L");
  }
  if (s.lambda < 0.0) throw PreconditionError("lambda must be >= 0");
  if (s.init_scale < 0.0) throw PreconditionError("init_scale must be >= 0");
  if (s.start_scale < 0.0) throw PreconditionError("start_scale must be >= 0");
  return s;
}

void Problem::set_noise_level(double level) {
  if (!(level >= 0.0)) throw PreconditionError("noise level must be >= 0");
  noise_ = level;
}

double Problem::tracking_error(const Vec& theta) const {
  check_dim(theta);
  return (theta - target()).squaredNorm();
}

void Problem::check_dim(const Vec& theta) const {
  if (theta.size() != dim()) {
    throw PreconditionError("dimension mismatch: expected " +
                            std::to_string(dim()) + ", got " +
                            std::to_string(theta.size()));
  }
}

Vec Problem::second_moment(const Vec& theta, Index batch, Rng& mc) const {
  constexpr int kDraws = 64;
  Vec acc = Vec::Zero(dim());
  for (int k = 0; k < kDraws; ++k) {
    acc += sample_gradient(theta, batch, mc, false).grad.cwiseAbs2();
  }
  return acc / kDraws;
}

std::unique_ptr<Problem> make_problem(const ProblemSpec& raw, Rng& data_rng) {
  const ProblemSpec spec = resolve_defaults(raw);
  switch (spec.kind) {
    case ProblemKind::kQuadratic:
      return detail::make_quadratic(spec, data_rng);
    case ProblemKind::kLeastSquares:
      return detail::make_least_squares(spec, data_rng);
    case ProblemKind::kMlpTeacherStudent:
      return detail::make_mlp(spec, data_rng);
    case ProblemKind::kPhaseRetrieval:
      return detail::make_phase_retrieval(spec, data_rng);
    case ProblemKind::kMatrixFactorization:
      return detail::make_matrix_factorization(spec, data_rng);
    case ProblemKind::kLogisticLabelFlip:
      return detail::make_logistic(spec, data_rng);
    case ProblemKind::kLasso:
      return detail::make_lasso(spec, data_rng);
  }
  throw PreconditionError("unhandled problem kind");
}

GradientSample sample_gradient(Problem& p, const Vec& theta, double sigma,
                               Index batch, Rng& rng, bool with_mean) {
  if (!(sigma >= 0.0)) throw PreconditionError("noise level must be >= 0");
  if (batch < 1) throw PreconditionError("batch must be >= 1");
  p.set_noise_level(sigma);
  return p.sample_gradient(theta, batch, rng, with_mean);
}

void drift_problem(Problem& p, double delta, Rng& rng) {
  if (!(delta >= 0.0)) throw PreconditionError("drift magnitude must be >= 0");
  if (delta == 0.0) return;
  p.drift(delta, rng);
}

}  // namespace adamtrack
