#pragma once

#include <cmath>

namespace adamtrack {

/// 1 - beta^n without cancellation for beta close to one.
inline double one_minus_pow(double beta, long n) {
  if (n <= 0) return 0.0;
  if (n == 1) return 1.0 - beta;
  if (beta < 0.99) return 1.0 - std::pow(beta, static_cast<double>(n));
  return -std::expm1(static_cast<double>(n) * std::log1p(beta - 1.0));
}

inline double pow_int(double beta, long n) {
  return std::pow(beta, static_cast<double>(n));
}

}  // namespace adamtrack
