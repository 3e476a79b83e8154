#include "adamtrack/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "adamtrack/numeric.hpp"

namespace adamtrack {
namespace {

constexpr double kCapSlack = 1e-12;

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw PreconditionError(std::string(name) + " must be finite and > 0");
  }
}

void validate_common(const BoundInputs& in) {
  require_positive(in.G, "G");
  require_positive(in.eps, "eps");
  require_positive(in.alpha, "alpha");
  if (!(in.beta1 >= 0.0 && in.beta1 < 1.0)) {
    throw PreconditionError("beta1 must lie in [0, 1)");
  }
  if (!(in.beta2 > 0.0 && in.beta2 < 1.0)) {
    throw PreconditionError("beta2 must lie in (0, 1)");
  }
  if (!(in.delta > 0.0 && in.delta < 1.0)) {
    throw PreconditionError("delta must lie in (0, 1)");
  }
  if (!(in.sigma >= 0.0)) throw PreconditionError("sigma must be >= 0");
  if (in.d < 1) throw PreconditionError("d must be >= 1");
  if (in.horizon < 1) throw PreconditionError("horizon T must be >= 1");
  if (!(in.multiplier > 0.0)) throw PreconditionError("multiplier must be > 0");
}

void require_cap(double alpha, double cap, const char* what) {
  if (alpha > cap * (1.0 + kCapSlack)) {
    throw PreconditionError(std::string("stepsize cap violated: alpha = ") +
                            fmt_double(alpha) + " > " + what + " = " +
                            fmt_double(cap));
  }
}

double first_moment_term(const AdamConstants& c, double sigma, Index d,
                         double G, double d1, double log_2t_delta) {
  return c.c1 * d1 +
         sigma * std::sqrt(2.0 * static_cast<double>(d) * c.kappa1 * log_2t_delta) +
         (4.0 * G / 3.0) * c.omega1 * log_2t_delta;
}

}  // namespace

double q_minus(const BoundInputs& in) { return 1.0 / (in.G + in.eps); }
double q_plus(const BoundInputs& in) { return 1.0 / in.eps; }
double d1_constant(const BoundInputs& in) {
  return in.alpha * in.L * in.G / in.eps + 2.0 * in.G;
}
double contraction_rate(const BoundInputs& in) {
  return 1.0 - 0.5 * in.alpha * q_minus(in) * in.mu;
}
double log_term(const BoundInputs& in) {
  return std::log(2.0 * static_cast<double>(in.horizon) / in.delta);
}

double weight(long t, long k, double beta) {
  if (t < 1 || k < 0 || k > t - 1) {
    throw PreconditionError("weight index out of range: need 0 <= k <= t-1");
  }
  return (1.0 - beta) * pow_int(beta, t - 1 - k) / one_minus_pow(beta, t);
}

AdamConstants constants(long t, double beta1, double beta2, double G,
                        double eps, double alpha, double L, double mu) {
  if (t < 1) throw PreconditionError("constants require t >= 1");
  AdamConstants c;
  c.t = t;
  const double b1t = pow_int(beta1, t);
  const double one_minus_b1t = one_minus_pow(beta1, t);
  c.kappa1 = (1.0 - beta1) * (1.0 + b1t) / ((1.0 + beta1) * one_minus_b1t);
  c.omega1 = (1.0 - beta1) / one_minus_b1t;
  c.c1 = beta1 / (1.0 - beta1) - static_cast<double>(t) * b1t / one_minus_b1t;
  if (t == 1) c.c1 = 0.0;  // the two terms agree exactly at t = 1
  c.c1 = std::max(c.c1, 0.0);
  c.theta2 = pow_int(beta2, t) + (1.0 - beta2);
  c.q_minus = 1.0 / (G + eps);
  c.q_plus = 1.0 / eps;
  c.d1 = alpha * L * G / eps + 2.0 * G;
  c.rho = mu > 0.0 ? 1.0 - 0.5 * alpha * c.q_minus * mu
                   : std::numeric_limits<double>::quiet_NaN();
  return c;
}

AdamConstants constants(long t, const BoundInputs& in) {
  return constants(t, in.beta1, in.beta2, in.G, in.eps, in.alpha, in.L, in.mu);
}

double adam_tracking_alpha_cap(const BoundInputs& in) {
  const double qm = q_minus(in), qp = q_plus(in);
  return std::min(qm * in.mu / (4.0 * qp * qp * in.L * in.L),
                  1.0 / (qm * in.mu));
}

double sgd_tracking_alpha_cap(const BoundInputs& in) {
  return std::min(in.mu / (in.L * in.L), 1.0 / in.L);
}

double stationarity_alpha_cap(const BoundInputs& in) {
  return 1.0 / (4.0 * in.L * q_plus(in));
}

double floor_alpha_max(const BoundInputs& in) {
  return std::min(in.mu * in.eps * in.eps / (4.0 * in.L * in.L * (in.G + in.eps)),
                  (in.G + in.eps) / in.mu);
}

void require_adam_tracking_cap(const BoundInputs& in) {
  validate_common(in);
  require_positive(in.mu, "mu");
  require_positive(in.L, "L");
  require_cap(in.alpha, adam_tracking_alpha_cap(in),
              "min{q_- mu / (4 q_+^2 L^2), 1 / (q_- mu)}");
}

double eta_bound(long t, double beta2, double G, double eps) {
  const double theta2 = pow_int(beta2, t + 1) + (1.0 - beta2);
  const double g2 = G * G;
  return g2 * g2 * theta2 / std::pow(eps, 4);
}

double eta_bound_hp(long t, double beta2, double G, double eps, double sigma,
                    Index d, long T, double delta) {
  const double lg = std::log(2.0 * static_cast<double>(d) *
                             static_cast<double>(T) / delta);
  const double transient = pow_int(beta2, t + 1) / one_minus_pow(beta2, t + 1);
  const double chi =
      4.0 * G * sigma * std::sqrt(2.0 * static_cast<double>(d) * lg) +
      (2.0 * G * G / 3.0) * lg;
  return G * G / std::pow(eps, 4) *
         (transient * G * G + (1.0 - beta2) * chi);
}

double r_hp_bound(const AdamConstants& c, double sigma, Index d, double G,
                  double d1, long T, double delta) {
  const double lg = std::log(2.0 * static_cast<double>(T) / delta);
  return first_moment_term(c, sigma, d, G, d1, lg);
}

std::vector<double> hp_tracking_series(const BoundInputs& in,
                                       std::span<const double> drift_series,
                                       long n) {
  require_adam_tracking_cap(in);
  if (n > in.horizon) throw PreconditionError("t must not exceed horizon T");
  if (static_cast<long>(drift_series.size()) < n) {
    throw PreconditionError("drift series shorter than t");
  }
  const double qm = q_minus(in), qp = q_plus(in);
  const double rho = contraction_rate(in);
  const double d1 = d1_constant(in);
  const double lg = log_term(in);
  const double a = in.alpha * qm * in.mu;
  const double w_drift = 5.0 / a;
  const double w_eta = 10.0 * in.alpha * std::pow(in.G, 4) /
                       (std::pow(in.eps, 4) * qm * in.mu);
  const double w_r = 10.0 * in.alpha * qp * qp / (qm * in.mu);

  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  double geom = 1.0;  // rho^t
  double acc = 0.0;   // the three weighted sums, folded together
  out[0] = in.init_err;
  for (long t = 1; t <= n; ++t) {
    const long l = t - 1;
    const AdamConstants c = constants(l + 1, in);
    const double dl = drift_series[static_cast<std::size_t>(l)];
    const double r = first_moment_term(c, in.sigma, in.d, in.G, d1, lg);
    acc = rho * acc + w_drift * dl * dl + w_eta * c.theta2 + w_r * r * r;
    geom *= rho;
    out[static_cast<std::size_t>(t)] = geom * in.init_err + acc;
  }
  return out;
}

double hp_tracking_rhs(const BoundInputs& in,
                       std::span<const double> drift_series, long t) {
  require_adam_tracking_cap(in);
  if (t < 0) throw PreconditionError("t must be >= 0");
  if (t > in.horizon) throw PreconditionError("t must not exceed horizon T");
  if (static_cast<long>(drift_series.size()) < t) {
    throw PreconditionError("drift series shorter than t");
  }
  const double qm = q_minus(in), qp = q_plus(in);
  const double rho = contraction_rate(in);
  const double d1 = d1_constant(in);
  const double lg = log_term(in);
  const double a = in.alpha * qm * in.mu;

  double s_drift = 0.0, s_eta = 0.0, s_r = 0.0;
  for (long l = 0; l < t; ++l) {
    const double w = pow_int(rho, t - l - 1);
    const AdamConstants c = constants(l + 1, in);
    const double dl = drift_series[static_cast<std::size_t>(l)];
    const double r = first_moment_term(c, in.sigma, in.d, in.G, d1, lg);
    s_drift += w * dl * dl;
    s_eta += w * c.theta2;
    s_r += w * r * r;
  }
  return pow_int(rho, t) * in.init_err + (5.0 / a) * s_drift +
         (10.0 * in.alpha * std::pow(in.G, 4) / (std::pow(in.eps, 4) * qm * in.mu)) *
             s_eta +
         (10.0 * in.alpha * qp * qp / (qm * in.mu)) * s_r;
}

double sgd_hp_rhs(const BoundInputs& in, std::span<const double> drift_series,
                  long t) {
  validate_common(in);
  require_positive(in.mu, "mu");
  require_positive(in.L, "L");
  require_cap(in.alpha, sgd_tracking_alpha_cap(in), "min{mu / L^2, 1 / L}");
  if (t < 0) throw PreconditionError("t must be >= 0");
  if (static_cast<long>(drift_series.size()) < t) {
    throw PreconditionError("drift series shorter than t");
  }
  if (t == 0) return in.init_err;
  const double rho = 1.0 - in.alpha * in.mu / 2.0;
  double dt = 0.0, dt2 = 0.0;
  for (long l = 0; l < t; ++l) {
    const double dl = drift_series[static_cast<std::size_t>(l)];
    dt += pow_int(rho, t - l - 1) * dl * dl;
    dt2 += pow_int(rho, 2 * (t - l - 1)) * dl * dl;
  }
  const double s2 = in.sigma * in.sigma;
  const double dd = static_cast<double>(in.d);
  const double lg = log_term(in);
  const double a = in.alpha;
  const double rhs = pow_int(rho, t) * in.init_err + dt / (a * in.mu) +
                     dd * s2 * a / in.mu + dd * s2 * a * a * lg +
                     (s2 * a / in.mu + a * a * s2 * dt2) * lg;
  return in.multiplier * rhs;
}

double expected_tracking_rhs(const BoundInputs& in, double drift_sq, long t) {
  require_adam_tracking_cap(in);
  if (t < 0) throw PreconditionError("t must be >= 0");
  if (!(drift_sq >= 0.0)) throw PreconditionError("drift bound must be >= 0");
  if (t == 0) return in.init_err;
  const double qm = q_minus(in), qp = q_plus(in);
  const double rho = contraction_rate(in);
  const double d1 = d1_constant(in);
  const double a = in.alpha * qm * in.mu;
  double s_r = 0.0, s_eta = 0.0;
  for (long l = 0; l < t; ++l) {
    const double w = pow_int(rho, t - l - 1);
    const AdamConstants c = constants(l + 1, in);
    s_r += w * (2.0 * c.c1 * c.c1 * d1 * d1 + 8.0 * in.G * in.G * c.kappa1);
    s_eta += w * c.theta2;
  }
  return pow_int(rho, t) * in.init_err + 10.0 * drift_sq / (a * a) +
         (10.0 * in.alpha * qp * qp / (qm * in.mu)) * s_r +
         (10.0 * in.alpha * std::pow(in.G, 4) / (std::pow(in.eps, 4) * qm * in.mu)) *
             s_eta;
}

double tracking_floor(const BoundInputs& in, double alpha) {
  const double qm = q_minus(in), qp = q_plus(in);
  const double d1 = alpha * in.L * in.G / in.eps + 2.0 * in.G;
  const double lg = log_term(in);
  const double den = qm * qm * in.mu * in.mu;
  const double b1 = in.beta1;
  const double drift = in.drift * in.drift / (den * alpha * alpha);
  const double memory =
      qp * qp * b1 * b1 * d1 * d1 / (den * (1.0 - b1) * (1.0 - b1));
  const double variance =
      qp * qp * static_cast<double>(in.d) * in.sigma * in.sigma * lg / den;
  const double bernstein = qp * qp * in.G * in.G * lg * lg / den;
  const double precond =
      std::pow(in.G, 4) * std::pow(qp, 4) * (1.0 - in.beta2) / den;
  return in.multiplier * (drift + memory + variance + bernstein + precond);
}

FloorResult floor_and_burnin(const BoundInputs& in) {
  validate_common(in);
  require_positive(in.mu, "mu");
  require_positive(in.L, "L");
  if (!(in.drift >= 0.0)) throw PreconditionError("drift bound must be >= 0");
  FloorResult out;
  out.alpha_max = floor_alpha_max(in);
  if (!(out.alpha_max > 0.0) || !std::isfinite(out.alpha_max)) {
    throw PreconditionError("empty feasible stepsize range for the floor");
  }
  // E_A is a sum of convex functions of alpha, hence unimodal in log alpha.
  const double span = std::log(1e12);
  double a = std::log(out.alpha_max) - span;
  double b = std::log(out.alpha_max);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double x) { return tracking_floor(in, std::exp(x)); };
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-7) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  double best = std::exp(0.5 * (a + b));
  if (tracking_floor(in, out.alpha_max) <= tracking_floor(in, best)) {
    best = out.alpha_max;
  }
  out.alpha_star = best;
  out.floor = tracking_floor(in, best);
  const double ratio = in.init_err / out.floor;
  out.burnin = ratio > 1.0
                   ? std::log(ratio) / (q_minus(in) * in.mu * out.alpha_star)
                   : 0.0;
  return out;
}

double projected_stationarity_rhs(const BoundInputs& in, double variation,
                                  long T) {
  validate_common(in);
  require_positive(in.L, "L");
  require_cap(in.alpha, stationarity_alpha_cap(in), "1 / (4 L q_+)");
  if (T < 1) throw PreconditionError("T must be >= 1");
  if (!(variation >= 0.0)) throw PreconditionError("variation must be >= 0");
  const double qm = q_minus(in), qp = q_plus(in);
  const double d1 = d1_constant(in);
  const double lg = std::log(2.0 * static_cast<double>(T) / in.delta);
  double s_theta = 0.0, s_r = 0.0;
  for (long t = 0; t < T; ++t) {
    const AdamConstants c = constants(t + 1, in);
    const double r = first_moment_term(c, in.sigma, in.d, in.G, d1, lg);
    s_theta += c.theta2;
    s_r += r * r;
  }
  const double tt = static_cast<double>(T);
  return 8.0 * (in.gap + variation) / (in.alpha * tt) +
         12.0 / qm * std::pow(in.G, 4) / std::pow(in.eps, 4) * s_theta / tt +
         12.0 * qp * s_r / tt;
}

double expected_stationarity_rhs(const BoundInputs& in, double variation,
                                 long T) {
  validate_common(in);
  require_positive(in.L, "L");
  require_cap(in.alpha, stationarity_alpha_cap(in), "1 / (4 L q_+)");
  if (T < 1) throw PreconditionError("T must be >= 1");
  const double qm = q_minus(in), qp = q_plus(in);
  const double d1 = d1_constant(in);
  double s_theta = 0.0, s_r = 0.0;
  for (long t = 0; t < T; ++t) {
    const AdamConstants c = constants(t + 1, in);
    s_theta += c.theta2;
    s_r += 2.0 * c.c1 * c.c1 * d1 * d1 + 8.0 * in.G * in.G * c.kappa1;
  }
  const double tt = static_cast<double>(T);
  return 8.0 * (in.gap + variation) / (in.alpha * tt) +
         12.0 / qm * std::pow(in.G, 4) / std::pow(in.eps, 4) * s_theta / tt +
         12.0 * qp * s_r / tt;
}

DecayFloor decay_floor_split(const BoundInputs& in, long T) {
  validate_common(in);
  require_positive(in.L, "L");
  require_cap(in.alpha, stationarity_alpha_cap(in), "1 / (4 L q_+)");
  if (T < 1) throw PreconditionError("T must be >= 1");
  const double qm = q_minus(in), qp = q_plus(in);
  const double d1 = d1_constant(in);
  const double lg = std::log(2.0 * static_cast<double>(T) / in.delta);
  const double b1 = in.beta1, b2 = in.beta2;
  const double dd = static_cast<double>(in.d);
  const double s2 = in.sigma * in.sigma;
  const double g4e4 = std::pow(in.G, 4) / std::pow(in.eps, 4);

  DecayFloor out;
  out.decay = (in.gap + in.variation) / in.alpha + g4e4 / (qm * (1.0 - b2)) +
              (dd * qp * s2 / (1.0 + b1) * std::log(static_cast<double>(T)) +
               qp * in.G * in.G * lg) *
                  lg;
  out.floor = dd * qp * s2 * (1.0 - b1) / (1.0 + b1) * lg +
              qp * in.G * in.G * (1.0 - b1) * (1.0 - b1) * lg * lg +
              qp * d1 * d1 * b1 * b1 / ((1.0 - b1) * (1.0 - b1)) +
              g4e4 * (1.0 - b2) / qm;
  out.decay *= in.multiplier;
  out.floor *= in.multiplier;
  return out;
}

}  // namespace adamtrack
