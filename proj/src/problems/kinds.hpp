#pragma once

#include <memory>
#include <random>

#include "adamtrack/problems.hpp"

namespace adamtrack::detail {

std::unique_ptr<Problem> make_quadratic(const ProblemSpec& s, Rng& rng);
std::unique_ptr<Problem> make_least_squares(const ProblemSpec& s, Rng& rng);
std::unique_ptr<Problem> make_mlp(const ProblemSpec& s, Rng& rng);
std::unique_ptr<Problem> make_phase_retrieval(const ProblemSpec& s, Rng& rng);
std::unique_ptr<Problem> make_matrix_factorization(const ProblemSpec& s,
                                                   Rng& rng);
std::unique_ptr<Problem> make_logistic(const ProblemSpec& s, Rng& rng);
std::unique_ptr<Problem> make_lasso(const ProblemSpec& s, Rng& rng);

inline Mat gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat out(rows, cols);
  // Column-major fill keeps draws in storage order.
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = n01(rng);
  }
  return out;
}

/// Thin Q factor of a rows x cols Gaussian matrix (rows >= cols).
inline Mat orthonormal_columns(Index rows, Index cols, Rng& rng) {
  const Mat g = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  return qr.householderQ() * Mat::Identity(rows, cols);
}

inline Index uniform_index(Index n, Rng& rng) {
  return std::uniform_int_distribution<Index>(0, n - 1)(rng);
}

/// Starting iterate shared by every kind: the target when warm-starting,
/// otherwise start_scale * N(0, I) (zero when start_scale is 0).
inline Vec starting_point(const ProblemSpec& s, const Vec& target, Rng& rng) {
  if (s.warm_start) return target;
  if (s.start_scale == 0.0) return Vec::Zero(target.size());
  return s.start_scale * gaussian_vector(target.size(), rng);
}

/// Batch second moment from the per-sample second moment and the mean.
inline Vec batch_second_moment(const Vec& mean, const Vec& per_sample_sq,
                               Index batch) {
  const Vec var = (per_sample_sq - mean.cwiseAbs2()).cwiseMax(0.0);
  return mean.cwiseAbs2() + var / static_cast<double>(batch);
}

}  // namespace adamtrack::detail
