#include "adamtrack/optim.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "adamtrack/numeric.hpp"

namespace adamtrack {

void validate(const ProjectionSpec& proj) {
  if (proj.kind == ProjectionKind::kNone) return;
  if (!(proj.lo < proj.hi)) {
    throw PreconditionError("projection box requires lo < hi");
  }
  if (proj.kind == ProjectionKind::kMetricBox) {
    if (proj.weight.size() == 0 || !(proj.weight.array() > 0.0).all()) {
      throw PreconditionError("metric box weight must be positive");
    }
  }
}

Vec metric_project(const Vec& z, const ProjectionSpec& proj) {
  switch (proj.kind) {
    case ProjectionKind::kNone:
      return z;
    case ProjectionKind::kBox:
    case ProjectionKind::kMetricBox:
      // With a diagonal metric the box projection separates per coordinate,
      // and each 1-d weighted problem is solved by the plain clamp.
      return z.cwiseMax(proj.lo).cwiseMin(proj.hi);
  }
  return z;
}

Vec projected_gradient_mapping(const Vec& theta, const Vec& mean_grad,
                               const Vec& precond, double alpha,
                               const ProjectionSpec& proj) {
  if (!(alpha > 0.0)) throw PreconditionError("alpha must be > 0");
  if (!(precond.array() > 0.0).all()) {
    throw PreconditionError("preconditioner must be positive");
  }
  const Vec scaled = precond.cwiseProduct(mean_grad);
  if (proj.kind == ProjectionKind::kNone) return scaled;
  ProjectionSpec metric = proj;
  metric.kind = ProjectionKind::kMetricBox;
  metric.weight = precond.cwiseInverse();
  return (theta - metric_project(theta - alpha * scaled, metric)) / alpha;
}

void validate(const AdamHyper& h) {
  if (!(h.alpha > 0.0)) throw PreconditionError("adam alpha must be > 0");
  if (!(h.beta1 > 0.0 && h.beta1 < 1.0)) {
    throw PreconditionError("adam beta1 must lie in (0, 1)");
  }
  if (!(h.beta2 > 0.0 && h.beta2 < 1.0)) {
    throw PreconditionError("adam beta2 must lie in (0, 1)");
  }
  if (!(h.eps > 0.0)) throw PreconditionError("adam eps must be > 0");
}

AdamState::AdamState(const AdamHyper& h, Index dim)
    : hyper(h), m(Vec::Zero(dim)), v(Vec::Zero(dim)), t(0) {
  validate(h);
}

void AdamState::restart() {
  m.setZero();
  v.setZero();
  t = 0;
}

AdamStepResult adam_step(AdamState& state, const Vec& grad,
                         const ProjectionSpec& proj, const Vec& theta) {
  if (grad.size() != theta.size() || grad.size() != state.m.size()) {
    throw PreconditionError("adam_step: dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw NonFiniteError("adam_step: non-finite gradient at step " +
                             std::to_string(state.t),
                         state.t);
  }
  const AdamHyper& h = state.hyper;
  state.m = h.beta1 * state.m + (1.0 - h.beta1) * grad;
  state.v = h.beta2 * state.v + (1.0 - h.beta2) * grad.cwiseAbs2();
  const long n = state.t + 1;

  AdamStepResult out;
  out.m_hat = state.m / one_minus_pow(h.beta1, n);
  out.v_hat = state.v / one_minus_pow(h.beta2, n);
  out.precond = (out.v_hat.cwiseSqrt().array() + h.eps).inverse().matrix();
  out.theta =
      metric_project(theta - h.alpha * out.precond.cwiseProduct(out.m_hat), proj);
  state.t = n;
  return out;
}

Vec predictable_second_moment(const AdamState& state, const Vec& s_next) {
  if (s_next.size() != state.v.size()) {
    throw PreconditionError("predictable_preconditioner: dimension mismatch");
  }
  if ((s_next.array() < 0.0).any()) {
    throw PreconditionError(
        "predictable_preconditioner: second moment has a negative entry");
  }
  const double b2 = state.hyper.beta2;
  return b2 * state.v + (1.0 - b2) * s_next;
}

Vec predictable_preconditioner(const AdamState& state, const Vec& s_next) {
  const Vec v_tilde = predictable_second_moment(state, s_next);
  return (v_tilde.cwiseSqrt().array() + state.hyper.eps).inverse().matrix();
}

Vec sgd_step(const Vec& theta, const Vec& grad, double alpha,
             const ProjectionSpec& proj) {
  if (grad.size() != theta.size()) {
    throw PreconditionError("sgd_step: dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw NonFiniteError("sgd_step: non-finite gradient", -1);
  }
  return metric_project(theta - alpha * grad, proj);
}

SgdmResult sgdm_step(const Vec& theta, const Vec& grad, double alpha,
                     double beta, const Vec& buffer,
                     const ProjectionSpec& proj) {
  if (grad.size() != theta.size() || buffer.size() != theta.size()) {
    throw PreconditionError("sgdm_step: dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw NonFiniteError("sgdm_step: non-finite gradient", -1);
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw PreconditionError("sgdm momentum must lie in [0, 1)");
  }
  SgdmResult out;
  if (beta == 0.0) {
    out.theta = metric_project(theta - alpha * grad, proj);
  } else {
    out.theta = metric_project(theta - alpha * grad + beta * buffer, proj);
  }
  out.buffer = out.theta - theta;
  return out;
}

long StepDecayPlan::total_steps() const {
  return std::accumulate(lengths.begin(), lengths.end(), 0L);
}

StepDecayPlan build_step_decay_plan(double alpha0, double alpha_star,
                                    double q_minus, double mu,
                                    double init_err, double floor0) {
  if (!(alpha_star > 0.0)) throw PreconditionError("alpha* must be > 0");
  if (!(alpha_star < alpha0)) {
    throw PreconditionError("step decay requires alpha* < alpha0");
  }
  if (!(q_minus > 0.0) || !(mu > 0.0)) {
    throw PreconditionError("step decay requires q_minus > 0 and mu > 0");
  }
  if (!(floor0 > 0.0) || !(init_err > floor0)) {
    throw PreconditionError("step decay requires init_err > floor0 > 0");
  }
  StepDecayPlan plan;
  plan.alpha0 = alpha0;
  plan.alpha_star = alpha_star;
  // Ratios that are exact powers of two must not round up an extra epoch.
  const double halvings = std::log2(alpha0 / alpha_star);
  const int k_total = 1 + static_cast<int>(std::ceil(halvings - 1e-9));

  double alpha = alpha0;
  for (int k = 0; k < k_total; ++k) {
    if (k > 0) alpha = 0.5 * (alpha + alpha_star);
    plan.alphas.push_back(alpha);
    const double rate = q_minus * mu * alpha;
    const double log_term =
        k == 0 ? std::log(2.0 * init_err / floor0) : std::log(8.0);
    plan.lengths.push_back(
        static_cast<long>(std::ceil(2.0 / rate * log_term)));
  }
  return plan;
}

}  // namespace adamtrack
