// adamtrack command-line front end.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adamtrack/bounds.hpp"
#include "adamtrack/config.hpp"
#include "adamtrack/harness.hpp"
#include "adamtrack/metrics.hpp"
#include "adamtrack/plot.hpp"

namespace fs = std::filesystem;
using namespace adamtrack;

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string seed_list;
  std::string out = "runs";
  int workers = -1;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Config load_config(const CommonArgs& a) {
  Config cfg = Config::load(a.config);
  for (const auto& s : a.sets) cfg.set_override(s);
  if (!a.seed_list.empty()) {
    std::string list = a.seed_list;
    if (list.front() != '[') list = "[" + list + "]";
    cfg.set_override("experiment.seeds=" + list);
  }
  cfg.validate();
  return cfg;
}

std::string sweep_dir(const std::string& param, const std::string& value) {
  return param + "=" + value;
}

PlotSpec plot_spec(const ExperimentConfig& e, const std::string& suffix) {
  PlotSpec spec;
  spec.title = (e.plot_title.empty() ? e.name : e.plot_title) + suffix;
  spec.ylabel = e.plot_ylabel.empty() ? e.plot_column : e.plot_ylabel;
  return spec;
}

Series series_of(const Aggregate& a, const std::string& label) {
  Series s;
  s.label = label;
  for (long t : a.t) s.t.push_back(static_cast<double>(t));
  s.mean = a.mean;
  s.sem = a.sem;
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  f << text;
  if (!f) throw std::runtime_error(path.string() + ": write failed");
}

void report(const std::string& where, const TuneResult& r) {
  for (const auto& a : r.aggregates) {
    std::cout << where << ' ' << to_string(a.optimizer);
    if (a.all_diverged) {
      std::cout << " all runs diverged\n";
    } else {
      std::cout << " lr=" << format_number(a.chosen_lr)
                << " tail=" << format_number(a.tail) << '\n';
    }
  }
}

int cmd_run(const CommonArgs& a, bool sweep) {
  const Config cfg = load_config(a);
  const auto param = cfg.sweep_param();
  if (sweep && !param) throw UsageError("config declares no sweep.param");
  if (!sweep && param) throw UsageError("config declares a sweep; use the sweep verb");

  std::vector<std::string> regimes = cfg.regimes();
  if (regimes.empty()) regimes.push_back("");
  const std::string name = cfg.resolve(regimes.front()).name;
  const fs::path root = fs::path(a.out) / (name + "-" + cfg.hash());

  std::vector<std::unique_ptr<TuneResult>> results;
  std::vector<ManifestEntry> entries;
  std::vector<std::uint64_t> seeds;
  for (const auto& regime : regimes) {
    const fs::path rdir = regime.empty() ? root : root / regime;
    if (!sweep) {
      const ExperimentConfig e = cfg.resolve(regime);
      seeds = e.seeds;
      results.push_back(std::make_unique<TuneResult>(tune_and_aggregate(e, a.workers)));
      const TuneResult& r = *results.back();
      persist(r, rdir);
      std::vector<Series> series;
      for (const auto& agg : r.aggregates) {
        if (!agg.all_diverged) series.push_back(series_of(agg, to_string(agg.optimizer)));
      }
      if (!series.empty()) {
        write_text(rdir / "figure.svg",
                   render_svg(series, plot_spec(e, regime.empty() ? "" : " (" + regime + ")")));
      }
      entries.push_back({regime, "", fs::relative(rdir, root).string(), &r});
      report(regime.empty() ? name : regime, r);
      continue;
    }
    std::vector<Series> series;
    ExperimentConfig last;
    for (const auto& value : cfg.sweep_values()) {
      const ExperimentConfig e = cfg.resolve(regime, value);
      seeds = e.seeds;
      last = e;
      const fs::path vdir = rdir / sweep_dir(*param, value);
      results.push_back(std::make_unique<TuneResult>(tune_and_aggregate(e, a.workers)));
      const TuneResult& r = *results.back();
      persist(r, vdir);
      for (const auto& agg : r.aggregates) {
        if (agg.all_diverged) continue;
        std::string label = *param + "=" + value;
        if (r.aggregates.size() > 1) label = to_string(agg.optimizer) + " " + label;
        series.push_back(series_of(agg, label));
      }
      entries.push_back({regime, e.sweep_label, fs::relative(vdir, root).string(), &r});
      report((regime.empty() ? name : regime) + " " + e.sweep_label, r);
    }
    if (!series.empty()) {
      write_text(rdir / "figure.svg",
                 render_svg(series, plot_spec(last, regime.empty() ? "" : " (" + regime + ")")));
    }
  }
  write_manifest(root / "manifest.json", cfg, seeds, entries);
  std::cout << "wrote " << root.string() << '\n';
  return 0;
}

int cmd_verify(const CommonArgs& a, long reps, std::optional<double> delta) {
  Config cfg = load_config(a);
  if (delta) {
    cfg.set_override("bounds.delta=" + format_number(*delta));
    cfg.validate();
  }
  std::vector<std::string> regimes = cfg.regimes();
  if (regimes.empty()) regimes.push_back("");
  bool all_ok = true;
  for (const auto& regime : regimes) {
    const ExperimentConfig e = cfg.resolve(regime);
    const VerificationReport r = verify_bounds(e, reps, a.workers);
    const std::string tag = regime.empty() ? e.name : regime;
    std::cout << tag << " reps=" << r.reps << " steps=" << r.steps
              << " alpha=" << format_number(r.alpha) << '\n'
              << tag << " eta_violations=" << r.eta_violations << '\n';
    if (r.tracking_checked) {
      std::cout << tag << " hp_violation_fraction=" << format_number(r.hp_violation_fraction)
                << " delta=" << format_number(r.delta) << '\n'
                << tag << " bias_violations=" << r.bias_violations << '\n';
    }
    if (r.recursion_checked) {
      std::cout << tag << " recursion_violations=" << r.recursion_violations
                << " max_excess=" << format_number(r.recursion_max_excess) << '\n';
    }
    if (r.pg_checked) {
      std::cout << tag << " pg_runs_violating=" << r.pg_runs_violating
                << " worst_ratio=" << format_number(r.pg_worst_ratio) << '\n';
    }
    std::cout << tag << " clip_events=" << r.clip_events
              << " premise_violations=" << r.premise_violations
              << " diverged=" << r.diverged << '\n'
              << tag << (r.passed() ? " PASS" : " FAIL") << '\n';
    all_ok = all_ok && r.passed();
  }
  return all_ok ? 0 : 3;
}

struct ConstantsArgs {
  double beta1 = 0.9, beta2 = 0.999, G = 10.0, eps = 1e-8, alpha = 1e-3;
  double L = 1.0, mu = 0.0, sigma = 0.0, delta = 0.1;
  long t = 1, upto = 0, T = 0;
  long d = 1;
};

int cmd_constants(const ConstantsArgs& c) {
  const long first = c.upto > 0 ? 1 : c.t;
  const long last = c.upto > 0 ? c.upto : c.t;
  if (first < 1) throw PreconditionError("t must be >= 1");
  const long T = c.T > 0 ? c.T : last;
  std::cout << "t,kappa1,omega1,c1,theta2,r_hp_bound,eta_bound\n";
  for (long t = first; t <= last; ++t) {
    const AdamConstants k =
        constants(t, c.beta1, c.beta2, c.G, c.eps, c.alpha, c.L, c.mu);
    const double r = r_hp_bound(k, c.sigma, c.d, c.G, k.d1, T, c.delta);
    const double eta = eta_bound(t - 1, c.beta2, c.G, c.eps);
    std::cout << t << ',' << format_number(k.kappa1) << ',' << format_number(k.omega1)
              << ',' << format_number(k.c1) << ',' << format_number(k.theta2) << ','
              << format_number(r) << ',' << format_number(eta) << '\n';
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& out,
             const std::string& column, const std::string& title,
             const std::string& ylabel) {
  std::vector<fs::path> paths;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& ent : fs::directory_iterator(in)) {
        const auto p = ent.path();
        if (p.extension() == ".csv" && p.filename().string().rfind("aggregate_", 0) != 0) {
          found.push_back(p);
        }
      }
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.emplace_back(in);
    }
  }
  PlotSpec spec;
  spec.title = title;
  spec.ylabel = ylabel.empty() ? column : ylabel;
  const std::string svg = render_svg(series_from_csvs(paths, column), spec);
  write_text(fs::absolute(out), svg);
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const NonFiniteError*>(&e)) return "nonfinite";
  if (dynamic_cast<const PreconditionError*>(&e)) return "precondition";
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  return "runtime";
}

void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("config", a.config, "Config file")->required();
  sub->add_option("--set", a.sets, "Override section.key=value")->allow_extra_args(false);
  sub->add_option("--seed-list", a.seed_list, "Comma-separated seeds");
  sub->add_option("--out", a.out, "Output root directory");
  sub->add_option("--workers", a.workers, "Parallel runs (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic optimizers on drifting objectives"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, verify_args;
  auto* run = app.add_subcommand("run", "Tune and run every regime of a config");
  add_common(run, run_args);
  auto* sweep = app.add_subcommand("sweep", "Run a config across its sweep values");
  add_common(sweep, sweep_args);

  auto* verify = app.add_subcommand("verify", "Monte Carlo check of the bounds");
  add_common(verify, verify_args);
  long reps = 50;
  std::optional<double> delta;
  verify->add_option("--reps", reps, "Independent seeds");
  verify->add_option("--delta", delta, "Failure probability");

  ConstantsArgs ca;
  auto* cons = app.add_subcommand("constants", "Print the per-step Adam constants");
  cons->add_option("--beta1", ca.beta1);
  cons->add_option("--beta2", ca.beta2);
  cons->add_option("--t", ca.t, "Single bias-correction index");
  cons->add_option("--upto", ca.upto, "Print t = 1..upto");
  cons->add_option("--G", ca.G);
  cons->add_option("--eps", ca.eps);
  cons->add_option("--alpha", ca.alpha);
  cons->add_option("--L", ca.L);
  cons->add_option("--mu", ca.mu);
  cons->add_option("--sigma", ca.sigma);
  cons->add_option("--d", ca.d);
  cons->add_option("--T", ca.T, "Horizon for the log factor (default: last t)");
  cons->add_option("--delta", ca.delta);

  std::vector<std::string> plot_inputs;
  std::string plot_out = "figure.svg", plot_column = "metric", plot_title, plot_ylabel;
  auto* plot = app.add_subcommand("plot", "Render run CSVs to SVG");
  plot->add_option("inputs", plot_inputs, "Run CSVs or directories")->required();
  plot->add_option("--out", plot_out);
  plot->add_option("--column", plot_column);
  plot->add_option("--title", plot_title);
  plot->add_option("--ylabel", plot_ylabel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*run) return cmd_run(run_args, false);
    if (*sweep) return cmd_run(sweep_args, true);
    if (*verify) return cmd_verify(verify_args, reps, delta);
    if (*cons) return cmd_constants(ca);
    if (*plot) return cmd_plot(plot_inputs, plot_out, plot_column, plot_title, plot_ylabel);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: " << error_kind(e) << ": " << msg << '\n';
    return 1;
  }
  return 2;
}
