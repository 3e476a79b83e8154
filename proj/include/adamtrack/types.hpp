#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace adamtrack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Every source of randomness in a run is one of these, owned by the caller.
using Rng = std::mt19937_64;

/// Builds an independent generator for a named sub-stream of a run seed.
/// Streams with different tags never share state, so e.g. the drift stream
/// is identical for every optimizer run on the same seed.
Rng make_stream(std::uint64_t seed, std::uint64_t tag);

/// Fills a vector with i.i.d. standard normal draws.
Vec gaussian_vector(Index n, Rng& rng);

/// Thrown when an input violates an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a run produces a NaN/Inf; carries the step where it happened.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace adamtrack
