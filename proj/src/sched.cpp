#include "adamtrack/sched.hpp"

#include <cmath>
#include <set>
#include <string>

namespace adamtrack {

Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag),
                    static_cast<std::uint32_t>(tag >> 32), 0x5eedu};
  return Rng(seq);
}

Vec gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

void validate(const ScheduleSpec& spec) {
  if (!(spec.scale >= 0.0) || !std::isfinite(spec.scale)) {
    throw PreconditionError("schedule scale must be finite and >= 0");
  }
  if (!(spec.offset >= 0.0) || !std::isfinite(spec.offset)) {
    throw PreconditionError("schedule offset must be finite and >= 0");
  }
}

double schedule_value(const ScheduleSpec& spec, long t) {
  if (t < 0) throw PreconditionError("schedule step index must be >= 0");
  switch (spec.kind) {
    case ScheduleKind::kConstant:
      return spec.offset;
    case ScheduleKind::kLog:
      return spec.scale * std::log(static_cast<double>(t) + 2.0);
  }
  return 0.0;
}

void validate(const DriftMode& mode, Index dim) {
  switch (mode.kind) {
    case DriftModeKind::kFullSpace:
    case DriftModeKind::kFunctionSpace:
      return;
    case DriftModeKind::kSubspace: {
      if (mode.basis.rows() != dim || mode.basis.cols() < 1) {
        throw PreconditionError("subspace basis must be d x r with r >= 1");
      }
      const Mat gram = mode.basis.transpose() * mode.basis;
      const Mat eye = Mat::Identity(gram.rows(), gram.cols());
      if ((gram - eye).cwiseAbs().maxCoeff() > 1e-10) {
        throw PreconditionError("subspace basis columns are not orthonormal");
      }
      return;
    }
    case DriftModeKind::kSupport: {
      if (mode.support.empty()) {
        throw PreconditionError("drift support must be non-empty");
      }
      std::set<Index> seen;
      for (Index j : mode.support) {
        if (j < 0 || j >= dim) {
          throw PreconditionError("drift support index " + std::to_string(j) +
                                  " out of range");
        }
        if (!seen.insert(j).second) {
          throw PreconditionError("drift support index " + std::to_string(j) +
                                  " repeated");
        }
      }
      return;
    }
  }
}

Vec random_unit_direction(Index dim, const DriftMode& mode, Rng& rng) {
  for (;;) {
    Vec u;
    switch (mode.kind) {
      case DriftModeKind::kFullSpace:
      case DriftModeKind::kFunctionSpace:
        u = gaussian_vector(dim, rng);
        break;
      case DriftModeKind::kSubspace:
        u = mode.basis * gaussian_vector(mode.basis.cols(), rng);
        break;
      case DriftModeKind::kSupport: {
        u = Vec::Zero(dim);
        const Vec g = gaussian_vector(static_cast<Index>(mode.support.size()), rng);
        for (std::size_t i = 0; i < mode.support.size(); ++i) {
          u[mode.support[i]] = g[static_cast<Index>(i)];
        }
        break;
      }
    }
    const double norm = u.norm();
    if (norm > 0.0 && std::isfinite(norm)) return u / norm;
    // ||u|| == 0 has probability zero; redraw rather than divide by it.
  }
}

Vec advance_target(const Vec& target, double delta, const DriftMode& mode,
                   Rng& rng) {
  if (!(delta >= 0.0)) throw PreconditionError("drift magnitude must be >= 0");
  if (mode.kind == DriftModeKind::kFunctionSpace) {
    throw PreconditionError(
        "function-space drift is applied by the problem, not advance_target");
  }
  if (delta == 0.0) return target;
  return target + delta * random_unit_direction(target.size(), mode, rng);
}

}  // namespace adamtrack
