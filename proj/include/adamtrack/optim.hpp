#pragma once

#include <vector>

#include "adamtrack/types.hpp"

namespace adamtrack {

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

enum class ProjectionKind { kNone, kBox, kMetricBox };

/// Feasible set for the iterates. kMetricBox carries a positive diagonal
/// weight; for a box that metric projection is still the coordinatewise
/// clamp, the weight only matters for norms built on top of it.
struct ProjectionSpec {
  ProjectionKind kind = ProjectionKind::kNone;
  double lo = 0.0;
  double hi = 0.0;
  Vec weight;  // kMetricBox only

  static ProjectionSpec none() { return {}; }
  static ProjectionSpec box(double lo, double hi) {
    return {ProjectionKind::kBox, lo, hi, Vec()};
  }
  static ProjectionSpec metric_box(double lo, double hi, Vec weight) {
    return {ProjectionKind::kMetricBox, lo, hi, std::move(weight)};
  }
};

void validate(const ProjectionSpec& proj);

Vec metric_project(const Vec& z, const ProjectionSpec& proj);

/// (1/alpha) (theta - Proj_{P^{-1}}(theta - alpha * P * grad)), with P the
/// diagonal `precond`. Equals P * grad when the projection is inactive.
Vec projected_gradient_mapping(const Vec& theta, const Vec& mean_grad,
                               const Vec& precond, double alpha,
                               const ProjectionSpec& proj);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamHyper {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void validate(const AdamHyper& h);

/// Uncorrected moment accumulators. `t` counts completed steps; restarting
/// an epoch resets all three.
struct AdamState {
  AdamHyper hyper;
  Vec m;
  Vec v;
  long t = 0;

  AdamState() = default;
  AdamState(const AdamHyper& h, Index dim);
  void restart();
};

/// What one Adam step computed, kept for diagnostics.
struct AdamStepResult {
  Vec theta;    // theta_{t+1}
  Vec m_hat;    // bias-corrected first moment
  Vec v_hat;    // bias-corrected second moment
  Vec precond;  // diagonal of the realized preconditioner P_{t+1}
};

/// One projected Adam step from `theta` with sample gradient `grad`.
/// Mutates `state` (m, v, counter). Throws NonFiniteError on NaN/Inf input.
AdamStepResult adam_step(AdamState& state, const Vec& grad,
                         const ProjectionSpec& proj, const Vec& theta);

/// Diagonal of the predictable proxy built from v_t and the conditional
/// second moment s_{t+1}: (sqrt(beta2 v_t + (1-beta2) s) + eps)^{-1}.
/// Must be evaluated before adam_step mutates `state`.
Vec predictable_preconditioner(const AdamState& state, const Vec& s_next);

/// The proxy second moment beta2 v_t + (1-beta2) s_{t+1} itself.
Vec predictable_second_moment(const AdamState& state, const Vec& s_next);

// ---------------------------------------------------------------------------
// SGD and heavy-ball momentum
// ---------------------------------------------------------------------------

Vec sgd_step(const Vec& theta, const Vec& grad, double alpha,
             const ProjectionSpec& proj);

struct SgdmResult {
  Vec theta;
  Vec buffer;  // theta_{t+1} - theta_t, fed back as the next momentum term
};

/// theta_{t+1} = Proj(theta - alpha g + beta (theta_t - theta_{t-1})).
/// `buffer` holds theta_t - theta_{t-1} (zero at the first step).
SgdmResult sgdm_step(const Vec& theta, const Vec& grad, double alpha,
                     double beta, const Vec& buffer,
                     const ProjectionSpec& proj);

// ---------------------------------------------------------------------------
// Step decay with state restart
// ---------------------------------------------------------------------------

struct StepDecayPlan {
  double alpha0 = 0.0;
  double alpha_star = 0.0;
  std::vector<double> alphas;  // alpha_k, k = 0..K-1
  std::vector<long> lengths;   // T_k
  int epochs() const { return static_cast<int>(alphas.size()); }
  long total_steps() const;
};

/// Epoch stepsizes halve their distance to alpha_star; the first epoch runs
/// long enough to burn off init_err down to the alpha0 floor, later ones for
/// ceil(2 ln 8 / (q_minus mu alpha_k)) steps.
StepDecayPlan build_step_decay_plan(double alpha0, double alpha_star,
                                    double q_minus, double mu,
                                    double init_err, double floor0);

}  // namespace adamtrack
