#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adamtrack/optim.hpp"
#include "adamtrack/problems.hpp"
#include "adamtrack/sched.hpp"

namespace adamtrack {

class ConfigError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

enum class OptimizerKind { kSgd, kAdam, kSgdm };
std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct VerifyFlags {
  bool hp = false;    // high-probability tracking bound column
  bool exp = false;   // expected tracking bound column
  bool pg = false;    // projected-gradient stationarity bound column
  bool diag = false;  // r, eta, pg-norm and variation diagnostics
  bool any() const { return hp || exp || pg || diag; }
};

/// Constants fed to the bound evaluators. NaN fields are derived from the
/// problem at run time (G from the clip level, mu and L from the problem's
/// curvature, sigma from the noise schedule times sigma_scale).
struct BoundSettings {
  double G = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double sigma_scale = 1.632993161855452;  // sqrt(8/3)
  double delta = 0.1;
  double mu = std::numeric_limits<double>::quiet_NaN();
  double L = std::numeric_limits<double>::quiet_NaN();
  double multiplier = 1.0;
};

/// One fully resolved experiment (a single regime, a single sweep value).
struct ExperimentConfig {
  std::string name = "experiment";
  std::string regime;   // empty when the config declares no regimes
  std::string sweep_label;  // "param=value" when resolved from a sweep
  long T = 500;
  long eval_every = 20;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> lr_grid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2};
  std::vector<OptimizerKind> optimizers{OptimizerKind::kSgd,
                                        OptimizerKind::kAdam};
  double clip_norm = 10.0;
  ProjectionSpec box = ProjectionSpec::box(-100.0, 100.0);
  int workers = 0;  // 0: hardware concurrency
  std::string tune_on = "metric";  // or "tracking_err"
  ProblemSpec problem;
  Index batch = 1;
  ScheduleSpec drift = ScheduleSpec::constant(0.0);
  ScheduleSpec noise = ScheduleSpec::constant(0.0);
  AdamHyper adam{1e-3, 0.9, 0.999, 1e-8};
  double sgdm_beta = 0.9;
  bool decay = false;  // step decay with Adam restarts
  double decay_alpha_star = std::numeric_limits<double>::quiet_NaN();  // NaN: floor minimizer
  VerifyFlags verify;
  BoundSettings bounds;
  std::string plot_title;
  std::string plot_ylabel;
  std::string plot_column = "metric";
};

/// Raw key-value configuration: `section.key = value` lines, `#` comments,
/// bracketed lists. Keys may be prefixed by a regime name declared in
/// experiment.regimes to override them inside that regime.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin);
  static Config load(const std::filesystem::path& path);

  /// Applies `key=value`; throws ConfigError naming an unknown key.
  void set_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  std::vector<std::string> regimes() const;
  std::optional<std::string> sweep_param() const;
  std::vector<std::string> sweep_values() const;

  /// Resolves one regime (empty for none) with an optional sweep value.
  ExperimentConfig resolve(const std::string& regime,
                           const std::optional<std::string>& sweep_value =
                               std::nullopt) const;

  /// Sorted `key = value` lines; the basis of the hash.
  std::string canonical_text() const;
  /// 16 hex digits of the FNV-1a hash of canonical_text().
  std::string hash() const;

  /// Checks every key (regime prefixes included) and every resolvable
  /// regime; throws ConfigError on the first problem.
  void validate() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& value);
std::uint64_t fnv1a(const std::string& data);

}  // namespace adamtrack
