#include <cmath>

#include "problems/kinds.hpp"

namespace adamtrack::detail {
namespace {

// Two-layer ReLU network f(x) = w2 . relu(W1 x + b1) + b2.
// Parameter layout: W1 (hidden x in, column-major) | b1 | w2 | b2.
struct Net {
  Index in = 0;
  Index hidden = 0;

  Index dim() const { return hidden * in + 2 * hidden + 1; }

  struct View {
    Eigen::Map<const Mat> w1;
    Eigen::Map<const Vec> b1;
    Eigen::Map<const Vec> w2;
    double b2;
  };
  View view(const Vec& p) const {
    const double* d = p.data();
    return {Eigen::Map<const Mat>(d, hidden, in),
            Eigen::Map<const Vec>(d + hidden * in, hidden),
            Eigen::Map<const Vec>(d + hidden * in + hidden, hidden),
            d[hidden * in + 2 * hidden]};
  }

  // Pre-activations for rows of x (rows x hidden).
  Mat pre(const Vec& p, const Mat& x) const {
    const View v = view(p);
    Mat z = x * v.w1.transpose();
    z.rowwise() += v.b1.transpose();
    return z;
  }

  Vec forward(const Vec& p, const Mat& x) const {
    const View v = view(p);
    return (pre(p, x).cwiseMax(0.0) * v.w2).array() + v.b2;
  }

  // Sum over rows of r_i * grad_p f(x_i).
  Vec backward(const Vec& p, const Mat& x, const Vec& r) const {
    const View v = view(p);
    const Mat z = pre(p, x);
    const Mat h = z.cwiseMax(0.0);
    Mat dz = r * v.w2.transpose();
    dz.array() *= (z.array() > 0.0).cast<double>();
    Vec g(dim());
    Eigen::Map<Mat>(g.data(), hidden, in) = dz.transpose() * x;
    g.segment(hidden * in, hidden) = dz.colwise().sum().transpose();
    g.segment(hidden * in + hidden, hidden) = h.transpose() * r;
    g(dim() - 1) = r.sum();
    return g;
  }

  // Directional derivative of f(x_i) along u, for every row.
  Vec jvp(const Vec& p, const Mat& x, const Vec& u) const {
    const View v = view(p);
    const View du = view(u);
    const Mat z = pre(p, x);
    Mat dz = x * du.w1.transpose();
    dz.rowwise() += du.b1.transpose();
    dz.array() *= (z.array() > 0.0).cast<double>();
    return (dz * v.w2 + z.cwiseMax(0.0) * du.w2).array() + du.b2;
  }
};

// Teacher-student regression. Inputs are drawn uniformly from a fixed
// Gaussian pool so the population gradient is an exact finite sum.
class Mlp final : public Problem {
 public:
  Mlp(const ProblemSpec& s, Rng& rng) : net_{s.d, s.hidden} {
    pool_ = gaussian_matrix(s.pool_size, s.d, rng);
    val_ = gaussian_matrix(s.val_size, s.d, rng);
    target_ = Vec::Zero(net_.dim());
    const Index nw1 = s.hidden * s.d;
    target_.head(nw1) = s.init_scale * gaussian_vector(nw1, rng);
    target_.segment(nw1 + s.hidden, s.hidden) =
        s.init_scale * gaussian_vector(s.hidden, rng);
    start_ = starting_point(s, target_, rng);
  }

  ProblemKind kind() const override { return ProblemKind::kMlpTeacherStudent; }
  Index dim() const override { return net_.dim(); }
  std::unique_ptr<Problem> clone() const override {
    return std::make_unique<Mlp>(*this);
  }
  Vec initial_iterate() const override { return start_; }
  const Vec& target() const override { return target_; }

  double objective(const Vec& theta) const override {
    check_dim(theta);
    return 0.5 * (net_.forward(theta, pool_) - pool_teacher()).squaredNorm() /
           static_cast<double>(pool_.rows());
  }
  Vec mean_gradient(const Vec& theta) const override {
    check_dim(theta);
    const Vec r = net_.forward(theta, pool_) - pool_teacher();
    return net_.backward(theta, pool_, r) / static_cast<double>(pool_.rows());
  }
  GradientSample sample_gradient(const Vec& theta, Index batch, Rng& rng,
                                 bool with_mean) const override {
    check_dim(theta);
    Mat x(batch, pool_.cols());
    for (Index k = 0; k < batch; ++k) {
      x.row(k) = pool_.row(uniform_index(pool_.rows(), rng));
    }
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec y = net_.forward(target_, x);
    for (Index k = 0; k < batch; ++k) y(k) += noise_ * n01(rng);
    const Vec r = net_.forward(theta, x) - y;
    GradientSample out;
    out.grad = net_.backward(theta, x, r) / static_cast<double>(batch);
    if (with_mean) {
      out.mean_grad = mean_gradient(theta);
      out.noise = out.grad - out.mean_grad;
    }
    return out;
  }

  double metric(const Vec& theta) const override {
    check_dim(theta);
    return (net_.forward(theta, val_) - val_teacher()).squaredNorm() /
           static_cast<double>(val_.rows());
  }

  // The parameter direction is rescaled so the linearized change of the
  // teacher's validation predictions has RMS delta.
  void drift(double delta, Rng& rng) override {
    for (;;) {
      const Vec u = gaussian_vector(dim(), rng);
      const double rms = std::sqrt(net_.jvp(target_, val_, u).squaredNorm() /
                                   static_cast<double>(val_.rows()));
      if (rms > 0.0 && std::isfinite(rms)) {
        target_ += (delta / rms) * u;
        break;
      }
    }
    pool_dirty_ = val_dirty_ = true;
  }
  DriftMode drift_mode() const override {
    return {DriftModeKind::kFunctionSpace, Mat(), {}};
  }

 private:
  const Vec& pool_teacher() const {
    if (pool_dirty_) {
      pool_y_ = net_.forward(target_, pool_);
      pool_dirty_ = false;
    }
    return pool_y_;
  }
  const Vec& val_teacher() const {
    if (val_dirty_) {
      val_y_ = net_.forward(target_, val_);
      val_dirty_ = false;
    }
    return val_y_;
  }

  Net net_;
  Mat pool_, val_;
  Vec target_, start_;
  mutable Vec pool_y_, val_y_;
  mutable bool pool_dirty_ = true;
  mutable bool val_dirty_ = true;
};

}  // namespace

std::unique_ptr<Problem> make_mlp(const ProblemSpec& s, Rng& rng) {
  return std::make_unique<Mlp>(s, rng);
}

}  // namespace adamtrack::detail
