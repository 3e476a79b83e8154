#pragma once

#include <vector>

#include "adamtrack/types.hpp"

namespace adamtrack {

enum class ScheduleKind { kConstant, kLog };

/// Drift or noise magnitude as a function of the step index.
/// kConstant returns `offset`; kLog returns `scale * ln(t + 2)`.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kConstant;
  double scale = 0.0;
  double offset = 0.0;

  static ScheduleSpec constant(double value) {
    return {ScheduleKind::kConstant, 0.0, value};
  }
  static ScheduleSpec log(double scale) {
    return {ScheduleKind::kLog, scale, 0.0};
  }
};

void validate(const ScheduleSpec& spec);

double schedule_value(const ScheduleSpec& spec, long t);

/// Where a vector-valued target is allowed to move.
enum class DriftModeKind { kFullSpace, kSubspace, kSupport, kFunctionSpace };

struct DriftMode {
  DriftModeKind kind = DriftModeKind::kFullSpace;
  Mat basis;                   // kSubspace: d x r, orthonormal columns
  std::vector<Index> support;  // kSupport: distinct indices in [0, d)

  static DriftMode full_space() { return {}; }
  static DriftMode subspace(Mat basis) {
    return {DriftModeKind::kSubspace, std::move(basis), {}};
  }
  static DriftMode on_support(std::vector<Index> idx) {
    return {DriftModeKind::kSupport, Mat(), std::move(idx)};
  }
};

/// Checks the basis/support invariants against the ambient dimension.
void validate(const DriftMode& mode, Index dim);

/// Unit direction drawn from a standard Gaussian restricted to the allowed
/// set. A zero draw is discarded and redrawn.
Vec random_unit_direction(Index dim, const DriftMode& mode, Rng& rng);

/// Returns target + delta * u / ||u||. delta == 0 returns the target
/// unchanged and consumes no randomness.
Vec advance_target(const Vec& target, double delta, const DriftMode& mode,
                   Rng& rng);

}  // namespace adamtrack
