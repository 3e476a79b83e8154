#pragma once

#include <span>
#include <vector>

#include "adamtrack/types.hpp"

namespace adamtrack {

/// Problem constants and hyperparameters shared by every bound evaluator.
struct BoundInputs {
  double mu = 1.0;     // (adaptive) strong monotonicity modulus
  double L = 1.0;      // Lipschitz constant of the mean gradient
  double G = 10.0;     // almost-sure sample gradient bound (clip level)
  double sigma = 0.0;  // sub-Gaussian noise level
  Index d = 1;
  double drift = 0.0;  // uniform drift bound Delta
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double delta = 0.1;  // failure probability
  long horizon = 1;    // T
  double init_err = 0.0;   // ||theta_0 - theta*_0||^2
  double gap = 0.0;        // G_1(theta_0) - G*
  double variation = 0.0;  // pathwise variation budget D_T
  /// Stands in for the absolute constants hidden behind "up to constants"
  /// statements; multiplies the whole right-hand side of those bounds.
  double multiplier = 1.0;
};

double q_minus(const BoundInputs& in);  // 1 / (G + eps)
double q_plus(const BoundInputs& in);   // 1 / eps
double d1_constant(const BoundInputs& in);  // alpha L G / eps + 2G
double contraction_rate(const BoundInputs& in);  // 1 - alpha q_- mu / 2
double log_term(const BoundInputs& in);  // log(2T / delta)

/// w_{i,t,k} = (1 - beta) beta^{t-1-k} / (1 - beta^t), 0 <= k <= t-1.
double weight(long t, long k, double beta);

struct AdamConstants {
  long t = 1;
  double kappa1 = 1.0;  // sum of squared first-moment weights
  double omega1 = 1.0;  // largest first-moment weight
  double c1 = 0.0;      // lag-weighted first-moment sum
  double theta2 = 1.0;  // beta2^t + (1 - beta2)
  double q_minus = 0.0;
  double q_plus = 0.0;
  double d1 = 0.0;
  double rho = 0.0;  // 1 - alpha q_- mu / 2 (needs mu; NaN when mu <= 0)
};

/// Per-step constants at bias-correction index t >= 1.
AdamConstants constants(long t, double beta1, double beta2, double G,
                        double eps, double alpha, double L, double mu = 0.0);
AdamConstants constants(long t, const BoundInputs& in);

// Validity caps. Each check throws PreconditionError naming the cap.
double adam_tracking_alpha_cap(const BoundInputs& in);
double sgd_tracking_alpha_cap(const BoundInputs& in);
double stationarity_alpha_cap(const BoundInputs& in);
double floor_alpha_max(const BoundInputs& in);
void require_adam_tracking_cap(const BoundInputs& in);

/// Deterministic preconditioner perturbation bound G^4 eps^-4 theta_{2,t+1}.
double eta_bound(long t, double beta2, double G, double eps);

/// High-probability refinement of eta_bound (union over d coordinates, T
/// steps).
double eta_bound_hp(long t, double beta2, double G, double eps, double sigma,
                    Index d, long T, double delta);

/// High-probability bound on the first-moment tracking error whose
/// bias-correction index is `c.t` (i.e. ||r_{c.t}||).
double r_hp_bound(const AdamConstants& c, double sigma, Index d, double G,
                  double d1, long T, double delta);

/// High-probability Adam tracking bound on ||theta_t - theta*_t||^2.
/// drift_series[l] = Delta_l for l < t. Throws if alpha exceeds the cap.
double hp_tracking_rhs(const BoundInputs& in, std::span<const double> drift_series,
                       long t);

/// The same bound for every t in [0, n], by a single forward recursion.
std::vector<double> hp_tracking_series(const BoundInputs& in,
                                       std::span<const double> drift_series,
                                       long n);

/// High-probability SGD tracking bound (absolute constants set to
/// in.multiplier). Throws if alpha > min(mu / L^2, 1 / L).
double sgd_hp_rhs(const BoundInputs& in, std::span<const double> drift_series,
                  long t);

/// Expected Adam tracking bound; drift_sq is the bound on E[Delta_t^2].
/// Returns init_err at t = 0.
double expected_tracking_rhs(const BoundInputs& in, double drift_sq, long t);

struct FloorResult {
  double floor = 0.0;          // E_A(alpha*)
  double burnin = 0.0;         // steps until the transient reaches the floor
  double alpha_star = 0.0;     // minimizer of E_A over (0, alpha_max]
  double alpha_max = 0.0;
};

/// E_A(alpha, delta, T) with in.drift as Delta, scaled by in.multiplier.
double tracking_floor(const BoundInputs& in, double alpha);

/// Minimizes tracking_floor over (0, alpha_max] (golden section in
/// log alpha, relative tolerance 1e-6) and derives the burn-in time.
FloorResult floor_and_burnin(const BoundInputs& in);

/// High-probability average projected-gradient bound over T steps, with
/// in.gap and the given variation budget. Throws if alpha > 1 / (4 L q_+).
double projected_stationarity_rhs(const BoundInputs& in, double variation,
                                  long T);

/// Expected-value analogue of projected_stationarity_rhs.
double expected_stationarity_rhs(const BoundInputs& in, double variation,
                                 long T);

struct DecayFloor {
  double decay = 0.0;  // Decay_T: divided by T in the rate
  double floor = 0.0;  // Floor_T: persists as T grows
  double rate(long T) const { return decay / static_cast<double>(T) + floor; }
};

/// Closed-form Decay_T / Floor_T split of the averaged stationarity bound,
/// scaled by in.multiplier.
DecayFloor decay_floor_split(const BoundInputs& in, long T);

}  // namespace adamtrack
