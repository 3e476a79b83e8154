#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adamtrack/bounds.hpp"
#include "adamtrack/config.hpp"
#include "adamtrack/metrics.hpp"
#include "adamtrack/optim.hpp"

namespace adamtrack {

/// Sub-stream tags; each run derives its generators from (seed, tag).
enum StreamTag : std::uint64_t {
  kDataStream = 1,    // fixed problem data and the initial target
  kDriftStream = 2,   // target random walk
  kSampleStream = 3,  // minibatch indices and observation noise
  kMomentStream = 4,  // Monte Carlo second-moment estimates
};

struct RunRecord {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::vector<StepMetrics> rows;  // eval cadence
  bool diverged = false;
  std::string error;  // diagnostic when diverged

  // Per-step quantities (every step, not just eval points).
  std::vector<double> drift;     // ||theta*_{t+1} - theta*_t||
  std::vector<double> bias_norm;  // ||B_{t+1}|| (Adam with diagnostics)
  long clip_events = 0;
  long premise_violations = 0;  // s_{t+1} > G^2 or ||gbar|| > G
  double max_decomposition_gap = 0.0;
  double gap = kNaN;  // G_1(theta_0) - lower bound
  BoundInputs bound_inputs;
  bool bounds_available = false;
  std::string bound_note;  // why a bound column was left empty
  std::optional<StepDecayPlan> plan;  // set when the run used step decay
  double decay_floor = kNaN;          // E_A(alpha*) for the plan
};

/// Runs one (optimizer, lr, seed) triple. Deterministic in its arguments.
RunRecord run_single(const ExperimentConfig& cfg, OptimizerKind opt, double lr,
                     std::uint64_t seed);

/// Mean of the column over eval points with 2t >= T.
double tail_mean(const std::vector<StepMetrics>& rows, long T,
                 const std::string& column);

double column_value(const StepMetrics& row, const std::string& column);

struct LrScore {
  double lr = 0.0;
  double tail = 0.0;  // mean tail across seeds; +inf when any seed diverged
  long diverged = 0;
};

struct Aggregate {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double chosen_lr = kNaN;
  bool all_diverged = false;
  std::vector<long> t;
  std::vector<double> mean;
  std::vector<double> sem;  // n - 1 denominator; 0 for one seed
  double tail = kNaN;
  std::vector<double> seed_tails;  // chosen lr, in seed order
  std::vector<LrScore> scores;
};

struct TuneResult {
  std::vector<RunRecord> runs;  // ordered by (optimizer, lr, seed)
  std::vector<Aggregate> aggregates;  // one per optimizer, config order
};

/// Mean and SEM across equally shaped run series.
void mean_and_sem(const std::vector<std::vector<double>>& series,
                  std::vector<double>& mean, std::vector<double>& sem);

/// Runs every (optimizer, lr, seed), picks the lr with the lowest mean tail
/// (ties toward the smaller lr) and aggregates the winner across seeds.
TuneResult tune_and_aggregate(const ExperimentConfig& cfg, int workers = -1);

/// Selection and aggregation over precomputed runs, ordered as in
/// TuneResult::runs.
Aggregate aggregate_runs(const ExperimentConfig& cfg, OptimizerKind opt,
                         const std::vector<const RunRecord*>& runs);

struct VerificationReport {
  long reps = 0;
  long steps = 0;
  double delta = 0.0;
  double alpha = 0.0;
  bool tracking_checked = false;  // hp coverage, bias and recursion
  long hp_runs_violating = 0;
  double hp_violation_fraction = 0.0;
  long eta_violations = 0;
  bool recursion_checked = false;
  long recursion_violations = 0;
  double recursion_max_excess = -1e300;  // max of lhs - rhs
  long bias_violations = 0;
  bool pg_checked = false;
  long pg_runs_violating = 0;
  double pg_worst_ratio = 0.0;  // max over runs of average / rhs
  long clip_events = 0;
  long premise_violations = 0;
  double max_decomposition_gap = 0.0;
  long diverged = 0;
  bool passed() const;
};

/// Monte Carlo verification of the tracking, perturbation, recursion and
/// stationarity bounds for Adam at alpha = the first lr of the grid.
/// verify.hp selects the tracking checks, verify.pg the stationarity check
/// (neither: both). Throws PreconditionError when alpha exceeds the cap of a
/// selected check or the problem has no certified curvature.
VerificationReport verify_bounds(const ExperimentConfig& cfg, long reps,
                                 int workers = -1);

/// Runs fn(i) for i in [0, n) on up to `workers` threads (<= 0: hardware
/// concurrency). Exceptions are rethrown for the lowest failing index.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

/// File name of a run CSV: <opt>_lr<lr>_seed<seed>.csv.
std::string run_file_name(OptimizerKind opt, double lr, std::uint64_t seed);

/// Writes one CSV per run and aggregate_<opt>.csv files into `dir`.
void persist(const TuneResult& result, const std::filesystem::path& dir);

/// Writes manifest.json: config, version, seeds and per-entry choices.
struct ManifestEntry {
  std::string regime;
  std::string sweep_label;
  std::string subdir;
  const TuneResult* result = nullptr;
};
void write_manifest(const std::filesystem::path& path, const Config& config,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<ManifestEntry>& entries);

/// The version string embedded at build time.
std::string version_string();

}  // namespace adamtrack
