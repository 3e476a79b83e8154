#include <cmath>

#include "problems/kinds.hpp"

namespace adamtrack::detail {
namespace {

// Phase retrieval y = (x.w)^2 + sigma eps, x ~ N(0, I). The Gaussian fourth
// moments give F and its gradient in closed form.
class PhaseRetrieval final : public Problem {
 public:
  PhaseRetrieval(const ProblemSpec& s, Rng& rng)
      : stationarity_metric_(s.metric == "stationarity") {
    val_ = gaussian_matrix(s.val_size, s.d, rng);
    target_ = (s.init_scale / std::sqrt(static_cast<double>(s.d))) *
              gaussian_vector(s.d, rng);
    start_ = starting_point(s, target_, rng);
  }

  ProblemKind kind() const override { return ProblemKind::kPhaseRetrieval; }
  Index dim() const override { return target_.size(); }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<PhaseRetrieval>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }

  double objective(const Vec& theta) const override {
    check_dim(theta);
    const double a = theta.squaredNorm();
    const double b = target_.squaredNorm();
    const double c = theta.dot(target_);
    return 0.5 * (3.0 * a * a - 2.0 * (a * b + 2.0 * c * c) + 3.0 * b * b);
  }
  Vec mean_gradient(const Vec& theta) const override {
    check_dim(theta);
    const double a = theta.squaredNorm();
    const double b = target_.squaredNorm();
    const double c = theta.dot(target_);
    return (6.0 * a - 2.0 * b) * theta - 4.0 * c * target_;
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    check_dim(theta);
    const Mat x = gaussian_matrix(batch, dim(), rng);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Vec pred = x * theta;
    Vec y = (x * target_).cwiseAbs2();
    for (Index k = 0; k < batch; ++k) y(k) += noise_ * n01(rng);
    const Vec r = 2.0 * (pred.cwiseAbs2() - y).cwiseProduct(pred);
    GradientSample out;
    out.grad = x.transpose() * r / static_cast<double>(batch);
    if (with_mean) {
      out.mean_grad = mean_gradient(theta);
      out.noise = out.grad - out.mean_grad;
    }
    return out;
  }

  double metric(const Vec& theta) const override {
    check_dim(theta);
    if (stationarity_metric_) return mean_gradient(theta).squaredNorm();
    const Vec diff = (val_ * theta).cwiseAbs2() - (val_ * target_).cwiseAbs2();
    return diff.squaredNorm() / static_cast<double>(val_.rows());
  }
  void drift(double delta, Rng& rng) override {
    target_ = advance_target(target_, delta, DriftMode::full_space(), rng);
  }

 private:
  bool stationarity_metric_;
  Mat val_;
  Vec target_, start_;
};

// Rank-r factorization of an n x m target M* = U* V*^T observed one entry at
// a time. Parameter layout: U (n x r) | V (m x r), both column-major.
class MatrixFactorization final : public Problem {
 public:
  MatrixFactorization(const ProblemSpec& s, Rng& rng)
      : rows_(s.n), cols_(s.m), rank_(s.rank) {
    const double scale =
        s.init_scale / std::pow(static_cast<double>(s.rank), 0.25);
    target_ = scale * gaussian_vector(dim(), rng);
    start_ = starting_point(s, target_, rng);
    refresh_target_matrix();
  }

  ProblemKind kind() const override {
    return ProblemKind::kMatrixFactorization;
  }
  Index dim() const override { return (rows_ + cols_) * rank_; }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<MatrixFactorization>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }

  double objective(const Vec& theta) const override {
    return 0.5 * residual(theta).squaredNorm() / entries();
  }
  Vec mean_gradient(const Vec& theta) const override {
    const Mat r = residual(theta);
    Vec g(dim());
    factor_u(g) = r * v_of(theta) / entries();
    factor_v(g) = r.transpose() * u_of(theta) / entries();
    return g;
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    check_dim(theta);
    const auto u = u_of(theta);
    const auto v = v_of(theta);
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec g = Vec::Zero(dim());
    for (Index k = 0; k < batch; ++k) {
      const Index i = uniform_index(rows_, rng);
      const Index j = uniform_index(cols_, rng);
      const double r = u.row(i).dot(v.row(j)) - m_star_(i, j) - noise_ * n01(rng);
      factor_u(g).row(i) += r * v.row(j);
      factor_v(g).row(j) += r * u.row(i);
    }
    GradientSample out;
    out.grad = g / static_cast<double>(batch);
    if (with_mean) {
      out.mean_grad = mean_gradient(theta);
      out.noise = out.grad - out.mean_grad;
    }
    return out;
  }
  Vec second_moment(const Vec& theta, Index batch, Rng&) const override {
    const Mat r2 = residual(theta).cwiseAbs2().array() + noise_ * noise_;
    const Mat u2 = u_of(theta).cwiseAbs2();
    const Mat v2 = v_of(theta).cwiseAbs2();
    Vec per_sample(dim());
    factor_u(per_sample) = r2 * v2 / entries();
    factor_v(per_sample) = r2.transpose() * u2 / entries();
    return batch_second_moment(mean_gradient(theta), per_sample, batch);
  }
  bool exact_second_moment() const override { return true; }

  double metric(const Vec& theta) const override {
    return residual(theta).squaredNorm() / entries();
  }
  void drift(double delta, Rng& rng) override {
    target_ = advance_target(target_, delta, DriftMode::full_space(), rng);
    refresh_target_matrix();
  }

 private:
  double entries() const { return static_cast<double>(rows_ * cols_); }
  Eigen::Map<const Mat> u_of(const Vec& p) const {
    return {p.data(), rows_, rank_};
  }
  Eigen::Map<const Mat> v_of(const Vec& p) const {
    return {p.data() + rows_ * rank_, cols_, rank_};
  }
  Eigen::Map<Mat> factor_u(Vec& p) const { return {p.data(), rows_, rank_}; }
  Eigen::Map<Mat> factor_v(Vec& p) const {
    return {p.data() + rows_ * rank_, cols_, rank_};
  }
  Mat residual(const Vec& theta) const {
    check_dim(theta);
    return u_of(theta) * v_of(theta).transpose() - m_star_;
  }
  void refresh_target_matrix() {
    m_star_ = u_of(target_) * v_of(target_).transpose();
  }

  Index rows_, cols_, rank_;
  Vec target_, start_;
  Mat m_star_;
};

}  // namespace

std::unique_ptr<Problem> make_phase_retrieval(const ProblemSpec& s, Rng& rng) {
  return std::make_unique<PhaseRetrieval>(s, rng);
}
std::unique_ptr<Problem> make_matrix_factorization(const ProblemSpec& s,
                                                   Rng& rng) {
  return std::make_unique<MatrixFactorization>(s, rng);
}

}  // namespace adamtrack::detail
