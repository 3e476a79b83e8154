#include <algorithm>
#include <cmath>
#include <numeric>

#include "problems/kinds.hpp"

namespace adamtrack::detail {
namespace {

Vec log_spaced(Index d, double lo, double hi) {
  Vec out(d);
  if (d == 1) {
    out(0) = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (Index j = 0; j < d; ++j) {
    out(j) = std::exp(a + (b - a) * static_cast<double>(j) /
                              static_cast<double>(d - 1));
  }
  out(d - 1) = hi;
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

Vec sign_or_zero(const Vec& theta) {
  return theta.unaryExpr([](double x) {
    return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  });
}

// F = 1/2 sum_j h_j (theta_j - theta*_j)^2 with additive Gaussian noise.
class Quadratic final : public Problem {
 public:
  Quadratic(const ProblemSpec& s, Rng& rng)
      : h_(log_spaced(s.d, s.mu, s.L)), mu_(s.mu), L_(s.L) {
    target_ = s.init_scale * gaussian_vector(s.d, rng);
    start_ = starting_point(s, target_, rng);
  }

  ProblemKind kind() const override { return ProblemKind::kQuadratic; }
  Index dim() const override { return h_.size(); }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<Quadratic>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }

  double objective(const Vec& theta) const override {
    check_dim(theta);
    return 0.5 * h_.dot((theta - target_).cwiseAbs2());
  }
  Vec mean_gradient(const Vec& theta) const override {
    check_dim(theta);
    return h_.cwiseProduct(theta - target_);
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    GradientSample out;
    Vec mean = mean_gradient(theta);
    Vec noise = (noise_ / std::sqrt(static_cast<double>(batch))) *
                gaussian_vector(dim(), rng);
    out.grad = mean + noise;
    if (with_mean) {
      out.mean_grad = std::move(mean);
      out.noise = std::move(noise);
    }
    return out;
  }
  Vec second_moment(const Vec& theta, Index batch, Rng&) const override {
    return mean_gradient(theta).cwiseAbs2().array() +
           noise_ * noise_ / static_cast<double>(batch);
  }
  bool exact_second_moment() const override { return true; }

  double metric(const Vec& theta) const override {
    return tracking_error(theta);
  }
  void drift(double delta, Rng& rng) override {
    target_ = advance_target(target_, delta, DriftMode::full_space(), rng);
  }
  std::optional<Curvature> curvature() const override {
    return Curvature{mu_, L_};
  }

 private:
  Vec h_;
  double mu_, L_;
  Vec target_, start_;
};

// F = 1/2 ||A(theta - theta*)||^2, A = Q diag(sqrt(lambda)); one sampled row
// per draw scaled by n so the sample is unbiased.
class LeastSquares final : public Problem {
 public:
  LeastSquares(const ProblemSpec& s, Rng& rng) : mu_(s.mu), L_(s.L) {
    const Mat q = orthonormal_columns(s.n, s.d, rng);
    a_ = q * log_spaced(s.d, s.mu, s.L).cwiseSqrt().asDiagonal();
    target_ = s.init_scale * gaussian_vector(s.d, rng);
    start_ = starting_point(s, target_, rng);
  }

  ProblemKind kind() const override { return ProblemKind::kLeastSquares; }
  Index dim() const override { return a_.cols(); }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<LeastSquares>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }

  double objective(const Vec& theta) const override {
    check_dim(theta);
    return 0.5 * (a_ * (theta - target_)).squaredNorm();
  }
  Vec mean_gradient(const Vec& theta) const override {
    check_dim(theta);
    return a_.transpose() * (a_ * (theta - target_));
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    check_dim(theta);
    const auto n = static_cast<double>(a_.rows());
    const double tau = obs_scale();
    std::normal_distribution<double> n01(0.0, 1.0);
    const Vec e = theta - target_;
    Vec grad = Vec::Zero(dim());
    for (Index k = 0; k < batch; ++k) {
      const Index i = uniform_index(a_.rows(), rng);
      const double resid = a_.row(i).dot(e) - tau * n01(rng);
      grad += (n * resid) * a_.row(i).transpose();
    }
    grad /= static_cast<double>(batch);
    GradientSample out;
    if (with_mean) {
      out.mean_grad = mean_gradient(theta);
      out.noise = grad - out.mean_grad;
    }
    out.grad = std::move(grad);
    return out;
  }
  Vec second_moment(const Vec& theta, Index batch, Rng&) const override {
    const auto n = static_cast<double>(a_.rows());
    const double tau = obs_scale();
    const Vec resid_sq = (a_ * (theta - target_)).cwiseAbs2().array() + tau * tau;
    const Vec per_sample = n * (a_.cwiseAbs2().transpose() * resid_sq);
    return batch_second_moment(mean_gradient(theta), per_sample, batch);
  }
  bool exact_second_moment() const override { return true; }

  double metric(const Vec& theta) const override {
    return tracking_error(theta);
  }
  void drift(double delta, Rng& rng) override {
    target_ = advance_target(target_, delta, DriftMode::full_space(), rng);
  }
  std::optional<Curvature> curvature() const override {
    return Curvature{mu_, L_};
  }

 private:
  double obs_scale() const {
    return noise_ / std::sqrt(static_cast<double>(a_.rows()) * L_);
  }

  Mat a_;
  double mu_, L_;
  Vec target_, start_;
};

// Rank-deficient logistic regression with symmetric label flips at rate pi
// (the noise level). F = (1/n) sum_i [log(1 + e^{z_i}) - pt_i z_i], z = A theta.
class Logistic final : public Problem {
 public:
  Logistic(const ProblemSpec& s, Rng& rng) {
    u_ = orthonormal_columns(s.d, s.rank, rng);
    const Mat z = gaussian_matrix(s.n, s.rank, rng) /
                  std::sqrt(static_cast<double>(s.rank));
    a_ = z * u_.transpose();
    target_ = s.init_scale * (u_ * gaussian_vector(s.rank, rng));
    start_ = starting_point(s, target_, rng);
    refresh_probs();
  }

  ProblemKind kind() const override { return ProblemKind::kLogisticLabelFlip; }
  Index dim() const override { return a_.cols(); }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<Logistic>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }

  void set_noise_level(double level) override {
    if (!(level >= 0.0 && level < 0.5)) {
      throw PreconditionError("label flip probability must lie in [0, 1/2)");
    }
    noise_ = level;
    refresh_probs();
  }

  double objective(const Vec& theta) const override {
    check_dim(theta);
    const Vec z = a_ * theta;
    double acc = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
      acc += log1p_exp(z(i)) - p_tilde_(i) * z(i);
    }
    return acc / static_cast<double>(z.size());
  }
  Vec mean_gradient(const Vec& theta) const override {
    check_dim(theta);
    const Vec z = a_ * theta;
    const Vec r = z.unaryExpr(&sigmoid) - p_tilde_;
    return a_.transpose() * r / static_cast<double>(a_.rows());
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    check_dim(theta);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec grad = Vec::Zero(dim());
    for (Index k = 0; k < batch; ++k) {
      const Index i = uniform_index(a_.rows(), rng);
      const double label = unif(rng) < p_tilde_(i) ? 1.0 : 0.0;
      grad += (sigmoid(a_.row(i).dot(theta)) - label) * a_.row(i).transpose();
    }
    grad /= static_cast<double>(batch);
    GradientSample out;
    if (with_mean) {
      out.mean_grad = mean_gradient(theta);
      out.noise = grad - out.mean_grad;
    }
    out.grad = std::move(grad);
    return out;
  }
  Vec second_moment(const Vec& theta, Index batch, Rng&) const override {
    const Vec s = (a_ * theta).unaryExpr(&sigmoid);
    // E[(s - y)^2] with y ~ Bernoulli(pt).
    const Vec w = (s.cwiseAbs2() - 2.0 * s.cwiseProduct(p_tilde_) + p_tilde_);
    const Vec per_sample =
        a_.cwiseAbs2().transpose() * w / static_cast<double>(a_.rows());
    return batch_second_moment(mean_gradient(theta), per_sample, batch);
  }
  bool exact_second_moment() const override { return true; }

  double metric(const Vec& theta) const override {
    return mean_gradient(theta).squaredNorm();
  }
  void drift(double delta, Rng& rng) override {
    target_ = advance_target(target_, delta, drift_mode(), rng);
    refresh_probs();
  }
  DriftMode drift_mode() const override { return DriftMode::subspace(u_); }
  double objective_lower_bound() const override {
    return p_tilde_.unaryExpr(&binary_entropy).mean();
  }

 private:
  void refresh_probs() {
    const Vec p = (a_ * target_).unaryExpr(&sigmoid);
    p_tilde_ = ((1.0 - 2.0 * noise_) * p).array() + noise_;
  }

  Mat u_, a_;
  Vec target_, start_, p_tilde_;
};

// Sparse regression with an l1 penalty; the target stays on a fixed support.
class Lasso final : public Problem {
 public:
  Lasso(const ProblemSpec& s, Rng& rng) : lambda_(s.lambda) {
    x_ = gaussian_matrix(s.n, s.d, rng) / std::sqrt(static_cast<double>(s.d));
    std::vector<Index> all(static_cast<size_t>(s.d));
    std::iota(all.begin(), all.end(), Index{0});
    // Partial Fisher-Yates: the first s entries form the support.
    for (Index k = 0; k < s.sparsity; ++k) {
      const Index j =
          k + uniform_index(s.d - k, rng);
      std::swap(all[static_cast<size_t>(k)], all[static_cast<size_t>(j)]);
    }
    support_.assign(all.begin(), all.begin() + s.sparsity);
    std::sort(support_.begin(), support_.end());
    target_ = Vec::Zero(s.d);
    for (Index j : support_) {
      target_(j) = s.init_scale * gaussian_vector(1, rng)(0);
    }
    start_ = starting_point(s, target_, rng);
  }

  ProblemKind kind() const override { return ProblemKind::kLasso; }
  Index dim() const override { return x_.cols(); }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<Lasso>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }
  double l1_weight() const override { return lambda_; }

  double objective(const Vec& theta) const override {
    check_dim(theta);
    const double n = static_cast<double>(x_.rows());
    return 0.5 / n * (x_ * (theta - target_)).squaredNorm() +
           lambda_ * theta.lpNorm<1>();
  }
  Vec smooth_gradient(const Vec& theta) const override {
    check_dim(theta);
    const double n = static_cast<double>(x_.rows());
    return x_.transpose() * (x_ * (theta - target_)) / n;
  }
  Vec mean_gradient(const Vec& theta) const override {
    return smooth_gradient(theta) + lambda_ * sign_or_zero(theta);
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    check_dim(theta);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Vec e = theta - target_;
    Vec grad = Vec::Zero(dim());
    for (Index k = 0; k < batch; ++k) {
      const Index i = uniform_index(x_.rows(), rng);
      const double resid = x_.row(i).dot(e) - noise_ * n01(rng);
      grad += resid * x_.row(i).transpose();
    }
    grad /= static_cast<double>(batch);
    grad += lambda_ * sign_or_zero(theta);
    GradientSample out;
    if (with_mean) {
      out.mean_grad = mean_gradient(theta);
      out.noise = grad - out.mean_grad;
    }
    out.grad = std::move(grad);
    return out;
  }
  Vec second_moment(const Vec& theta, Index batch, Rng&) const override {
    const double n = static_cast<double>(x_.rows());
    const Vec smooth = smooth_gradient(theta);
    const Vec resid_sq =
        (x_ * (theta - target_)).cwiseAbs2().array() + noise_ * noise_;
    const Vec smooth_sq = x_.cwiseAbs2().transpose() * resid_sq / n;
    const Vec var = (smooth_sq - smooth.cwiseAbs2()).cwiseMax(0.0);
    return mean_gradient(theta).cwiseAbs2() + var / static_cast<double>(batch);
  }
  bool exact_second_moment() const override { return true; }

  double metric(const Vec& theta) const override {
    check_dim(theta);
    return (x_ * (theta - target_)).squaredNorm() /
           static_cast<double>(x_.rows());
  }
  void drift(double delta, Rng& rng) override {
    target_ = advance_target(target_, delta, drift_mode(), rng);
  }
  DriftMode drift_mode() const override {
    return DriftMode::on_support(support_);
  }

 private:
  double lambda_;
  Mat x_;
  std::vector<Index> support_;
  Vec target_, start_;
};

}  // namespace

std::unique_ptr<Problem> make_quadratic(const ProblemSpec& s, Rng& rng) {
  return std::make_unique<Quadratic>(s, rng);
}
std::unique_ptr<Problem> make_least_squares(const ProblemSpec& s, Rng& rng) {
  return std::make_unique<LeastSquares>(s, rng);
}
std::unique_ptr<Problem> make_logistic(const ProblemSpec& s, Rng& rng) {
  return std::make_unique<Logistic>(s, rng);
}
std::unique_ptr<Problem> make_lasso(const ProblemSpec& s, Rng& rng) {
  return std::make_unique<Lasso>(s, rng);
}

}  // namespace adamtrack::detail
