#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "adamtrack/optim.hpp"
#include "adamtrack/types.hpp"

namespace adamtrack {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One CSV row. Diagnostic and bound columns hold NaN when not recorded.
struct StepMetrics {
  long t = 0;
  double tracking_err = kNaN;
  double metric = kNaN;
  double delta_sq = kNaN;
  double r_norm = kNaN;
  double eta_norm_sq = kNaN;
  double pg_norm_sq = kNaN;
  double var_inc = kNaN;
  double bound_hp = kNaN;
  double bound_exp = kNaN;
  double bound_pg = kNaN;
};

/// Exact header of a run CSV.
const std::vector<std::string>& csv_columns();

/// sum_j g_j^2 / p_j.
double weighted_pg_norm_sq(const Vec& g_map, const Vec& precond);

/// max(after - before, 0).
double positive_increment(double before, double after);

/// Running sums of the increments; element k is the budget after k + 1
/// increments.
std::vector<double> variation_budget(std::span<const double> increments);

/// ||m_hat - mean_grad||.
double first_moment_residual(const Vec& m_hat, const Vec& mean_grad);

/// Splits r = m_hat - mean_grad(theta_t) into the stale-gradient bias and
/// the weighted noise, accumulated with the same recursion as m so memory
/// stays O(d).
class ResidualTracker {
 public:
  ResidualTracker(double beta1, Index dim);

  /// Records the step's conditional mean and noise (grad = mean + noise).
  void push(const Vec& mean_grad, const Vec& noise);

  long steps() const { return t_; }
  Vec bias() const;   // sum_k w_k (gbar_k - gbar_t)
  Vec noise() const;  // sum_k w_k xi_k
  /// Largest absolute entry of r - (bias + noise).
  double decomposition_gap(const Vec& m_hat) const;

 private:
  double beta1_;
  long t_ = 0;
  Vec mean_acc_, noise_acc_, last_mean_;
};

/// (theta - prox(theta - alpha P grad_f)) / alpha for f + lambda ||.||_1
/// inside a box; the prox uses the diagonal metric P^{-1}, so the l1
/// threshold on coordinate j is alpha lambda p_j. With lambda = 0 this is
/// projected_gradient_mapping.
Vec proximal_gradient_mapping(const Vec& theta, const Vec& smooth_grad,
                              const Vec& precond, double alpha, double lambda,
                              const ProjectionSpec& proj);

/// Formats a double for CSV: shortest round-trip form, "nan" for NaN.
std::string format_number(double x);

void write_run_csv(const std::filesystem::path& path,
                   std::span<const StepMetrics> rows);
std::string run_csv_string(std::span<const StepMetrics> rows);

/// Reads a run CSV; throws with the path and offending column or line on a
/// schema mismatch.
std::vector<StepMetrics> read_run_csv(const std::filesystem::path& path);

}  // namespace adamtrack
