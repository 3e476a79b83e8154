#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "adamtrack/sched.hpp"
#include "adamtrack/types.hpp"

namespace adamtrack {

enum class ProblemKind {
  kQuadratic,
  kLeastSquares,
  kMlpTeacherStudent,
  kPhaseRetrieval,
  kMatrixFactorization,
  kLogisticLabelFlip,
  kLasso,
};

std::string_view to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view name);

/// Construction parameters. Fields a given kind does not use are ignored;
/// zero means "use that kind's default".
struct ProblemSpec {
  ProblemKind kind = ProblemKind::kQuadratic;
  Index d = 0;       // parameter / input dimension
  Index n = 0;       // observations (least squares, logistic, lasso), rows (MF)
  Index m = 0;       // MF columns
  Index rank = 0;    // MF rank, logistic subspace rank
  Index sparsity = 0;  // lasso support size
  Index hidden = 0;  // MLP width
  Index val_size = 0;   // validation set size (MLP, phase retrieval)
  Index pool_size = 0;  // MLP input pool
  double lambda = 0.0;  // lasso penalty
  double mu = 0.0;      // quadratic / least squares curvature range
  double L = 0.0;
  double init_scale = 0.0;   // teacher / target draw scale
  double start_scale = 0.0;  // scale of a random starting iterate (0: zero)
  bool warm_start = false;   // start the iterate at the initial target
  std::string metric;        // phase retrieval: "prediction" | "stationarity"
};

/// Fills unset fields with the kind's defaults and checks ranges.
ProblemSpec resolve_defaults(ProblemSpec spec);

struct Curvature {
  double mu = 0.0;
  double L = 0.0;
};

/// One stochastic gradient draw at a fixed iterate.
struct GradientSample {
  Vec grad;       // the sample gradient
  Vec mean_grad;  // its conditional mean (empty when not requested)
  Vec noise;      // grad - mean_grad (empty when not requested)
};

/// A time-varying objective. The instance holds the environment at the
/// current time: the target and the noise level. Fixed data (design
/// matrices, bases, pools, validation sets) never change after
/// construction.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual ProblemKind kind() const = 0;
  virtual Index dim() const = 0;
  virtual std::unique_ptr<Problem> clone() const = 0;

  /// Starting iterate theta_0.
  virtual Vec initial_iterate() const = 0;
  /// Parameter-space target theta*_t (teacher, factors, or true signal).
  virtual const Vec& target() const = 0;

  /// Population objective F_t at theta (exact unless exact_objective()
  /// is false, in which case it is evaluated on the validation set).
  virtual double objective(const Vec& theta) const = 0;
  virtual Vec mean_gradient(const Vec& theta) const = 0;
  virtual GradientSample sample_gradient(const Vec& theta, Index batch,
                                         Rng& rng, bool with_mean) const = 0;
  /// Coordinatewise conditional second moment of a batch gradient. Exact
  /// where closed-form; otherwise a 64-draw Monte Carlo estimate from `mc`.
  virtual Vec second_moment(const Vec& theta, Index batch, Rng& mc) const;
  virtual bool exact_second_moment() const { return false; }

  /// The reported measurement (tracking error, prediction/reconstruction
  /// MSE, stationarity, or signal MSE depending on the kind).
  virtual double metric(const Vec& theta) const = 0;

  /// Moves the target by drift magnitude delta (>= 0).
  virtual void drift(double delta, Rng& rng) = 0;
  virtual DriftMode drift_mode() const { return DriftMode::full_space(); }

  /// Weight of an l1 term inside objective() (0 for smooth kinds) and the
  /// gradient of the remaining smooth part.
  virtual double l1_weight() const { return 0.0; }
  virtual Vec smooth_gradient(const Vec& theta) const {
    return mean_gradient(theta);
  }

  virtual std::optional<Curvature> curvature() const { return std::nullopt; }
  virtual bool exact_objective() const { return true; }
  /// Lower bound on the objective over the feasible set.
  virtual double objective_lower_bound() const { return 0.0; }

  /// Label-flip kinds reject levels >= 1/2.
  virtual void set_noise_level(double level);
  double noise_level() const { return noise_; }

  /// ||theta - target||^2.
  double tracking_error(const Vec& theta) const;

 protected:
  void check_dim(const Vec& theta) const;
  double noise_ = 0.0;
};

/// Builds a problem; all fixed data and the initial target come from
/// `data_rng`.
std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, Rng& data_rng);

/// Sets the noise level for this step and draws a gradient.
GradientSample sample_gradient(Problem& p, const Vec& theta, double sigma,
                               Index batch, Rng& rng, bool with_mean = true);

/// Moves the problem's target; delta == 0 leaves it untouched.
void drift_problem(Problem& p, double delta, Rng& rng);

}  // namespace adamtrack
