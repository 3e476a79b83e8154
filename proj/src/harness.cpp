#include "adamtrack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "adamtrack/problems.hpp"

#ifndef ADAMTRACK_VERSION
#define ADAMTRACK_VERSION "unknown"
#endif

namespace adamtrack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec clip_to_norm(const Vec& g, double limit, bool& clipped) {
  const double n = g.norm();
  clipped = n > limit;
  if (!clipped) return g;
  return g * (limit / n);
}

double max_schedule(const ScheduleSpec& s, long T) {
  // Both kinds are non-decreasing in t.
  return schedule_value(s, std::max(T - 1, 0L));
}

/// Fills the constants the bound evaluators need; returns false (with a
/// note) when curvature is unknown.
bool fill_bound_inputs(const ExperimentConfig& cfg, const Problem& p,
                       double lr, BoundInputs& in, std::string& note) {
  const auto curv = p.curvature();
  const double mu = std::isnan(cfg.bounds.mu) ? (curv ? curv->mu : kNaN)
                                              : cfg.bounds.mu;
  const double L = std::isnan(cfg.bounds.L) ? (curv ? curv->L : kNaN)
                                            : cfg.bounds.L;
  in.G = std::isnan(cfg.bounds.G) ? cfg.clip_norm : cfg.bounds.G;
  in.sigma = std::isnan(cfg.bounds.sigma)
                 ? cfg.bounds.sigma_scale * max_schedule(cfg.noise, cfg.T) /
                       std::sqrt(static_cast<double>(cfg.batch))
                 : cfg.bounds.sigma;
  in.d = p.dim();
  in.alpha = lr;
  in.beta1 = cfg.adam.beta1;
  in.beta2 = cfg.adam.beta2;
  in.eps = cfg.adam.eps;
  in.delta = cfg.bounds.delta;
  in.horizon = cfg.T;
  in.multiplier = cfg.bounds.multiplier;
  in.mu = mu;
  in.L = L;
  if (std::isnan(L)) {
    note = "no certified curvature (set bounds.mu and bounds.L)";
    return false;
  }
  return true;
}

template <typename F>
double or_nan(F&& f, std::string& note) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    if (note.empty()) note = e.what();
    return kNaN;
  }
}

}  // namespace

std::string version_string() { return ADAMTRACK_VERSION; }

double column_value(const StepMetrics& row, const std::string& column) {
  if (column == "metric") return row.metric;
  if (column == "tracking_err") return row.tracking_err;
  throw PreconditionError("unsupported column '" + column + "'");
}

double tail_mean(const std::vector<StepMetrics>& rows, long T,
                 const std::string& column) {
  double acc = 0.0;
  long n = 0;
  for (const auto& r : rows) {
    if (2 * r.t >= T) {
      acc += column_value(r, column);
      ++n;
    }
  }
  if (n == 0) throw PreconditionError("no evaluation points in the tail");
  return acc / static_cast<double>(n);
}

RunRecord run_single(const ExperimentConfig& cfg, OptimizerKind opt, double lr,
                     std::uint64_t seed) {
  RunRecord rec;
  rec.optimizer = opt;
  rec.lr = lr;
  rec.seed = seed;

  Rng data_rng = make_stream(seed, kDataStream);
  Rng drift_rng = make_stream(seed, kDriftStream);
  Rng sample_rng = make_stream(seed, kSampleStream);
  Rng moment_rng = make_stream(seed, kMomentStream);

  auto prob = make_problem(cfg.problem, data_rng);
  const Index d = prob->dim();
  const bool diag = cfg.verify.diag;
  const bool need_objective = diag || cfg.verify.pg;
  const double G = std::isnan(cfg.bounds.G) ? cfg.clip_norm : cfg.bounds.G;

  Vec theta = metric_project(prob->initial_iterate(), cfg.box);
  AdamState adam(AdamHyper{lr, cfg.adam.beta1, cfg.adam.beta2, cfg.adam.eps}, d);
  Vec momentum = Vec::Zero(d);
  ResidualTracker tracker(cfg.adam.beta1, d);
  const Vec ones = Vec::Ones(d);

  std::vector<double> tracking(static_cast<std::size_t>(cfg.T));
  std::vector<double> var_inc(static_cast<std::size_t>(cfg.T), 0.0);
  rec.drift.assign(static_cast<std::size_t>(cfg.T), 0.0);

  // Step decay: epoch k runs at alphas[k] from a fresh Adam state.
  std::vector<long> epoch_start;
  if (cfg.decay && opt == OptimizerKind::kAdam) {
    BoundInputs in;
    std::string note;
    if (!fill_bound_inputs(cfg, *prob, lr, in, note) || !(in.mu > 0.0)) {
      throw PreconditionError("step decay: " +
                              (note.empty() ? std::string("no certified mu") : note));
    }
    in.drift = max_schedule(cfg.drift, cfg.T);
    const double alpha_star = std::isnan(cfg.decay_alpha_star)
                                  ? floor_and_burnin(in).alpha_star
                                  : cfg.decay_alpha_star;
    in.alpha = alpha_star;
    rec.decay_floor = tracking_floor(in, alpha_star);
    rec.plan = build_step_decay_plan(lr, alpha_star, q_minus(in), in.mu,
                                     prob->tracking_error(theta),
                                     tracking_floor(in, lr));
    long start = 0;
    for (long len : rec.plan->lengths) {
      epoch_start.push_back(start);
      start += len;
    }
  }
  std::size_t epoch = 0;

  const std::string ctx = "optimizer " + to_string(opt) + ", lr " +
                          format_number(lr) + ", seed " + std::to_string(seed);
  try {
    for (long t = 0; t < cfg.T; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      const bool record = t % cfg.eval_every == 0;
      StepMetrics row;
      row.t = t;
      tracking[ti] = prob->tracking_error(theta);
      if (record) {
        row.tracking_err = tracking[ti];
        row.metric = prob->metric(theta);
        if (!std::isfinite(row.metric)) {
          throw NonFiniteError("non-finite metric at step " + std::to_string(t), t);
        }
      }

      // Environment update: target drift, then this step's noise level.
      const double before = need_objective ? prob->objective(theta) : kNaN;
      const Vec old_target = prob->target();
      drift_problem(*prob, schedule_value(cfg.drift, t), drift_rng);
      const double dsq = (prob->target() - old_target).squaredNorm();
      rec.drift[ti] = std::sqrt(dsq);
      prob->set_noise_level(schedule_value(cfg.noise, t));
      if (need_objective) {
        const double after = prob->objective(theta);
        if (t == 0) {
          rec.gap = after - prob->objective_lower_bound();
        } else {
          var_inc[ti] = positive_increment(before, after);
        }
      }

      if (epoch < epoch_start.size() && t == epoch_start[epoch]) {
        adam.restart();
        adam.hyper.alpha = rec.plan->alphas[epoch];
        ++epoch;
      }

      GradientSample sample =
          prob->sample_gradient(theta, cfg.batch, sample_rng, diag);
      if (!sample.grad.allFinite()) {
        throw NonFiniteError("non-finite gradient at step " + std::to_string(t), t);
      }
      bool clipped = false;
      const Vec g = clip_to_norm(sample.grad, cfg.clip_norm, clipped);
      if (clipped) ++rec.clip_events;

      Vec next;
      Vec precond_tilde = ones;
      if (opt == OptimizerKind::kAdam) {
        if (diag) {
          const Vec s = prob->second_moment(theta, cfg.batch, moment_rng);
          if ((s.array() > G * G).any() || sample.mean_grad.norm() > G) {
            ++rec.premise_violations;
          }
          precond_tilde = predictable_preconditioner(adam, s);
        }
        const AdamStepResult res = adam_step(adam, g, cfg.box, theta);
        if (diag) {
          const Vec& mean = sample.mean_grad;
          row.r_norm = first_moment_residual(res.m_hat, mean);
          row.eta_norm_sq =
              (res.precond - precond_tilde).cwiseProduct(res.m_hat).squaredNorm();
          tracker.push(mean, g - mean);
          rec.bias_norm.push_back(tracker.bias().norm());
          rec.max_decomposition_gap = std::max(rec.max_decomposition_gap,
                                               tracker.decomposition_gap(res.m_hat));
        }
        next = res.theta;
      } else if (opt == OptimizerKind::kSgd) {
        if (diag && sample.mean_grad.norm() > G) ++rec.premise_violations;
        next = sgd_step(theta, g, lr, cfg.box);
      } else {
        if (diag && sample.mean_grad.norm() > G) ++rec.premise_violations;
        SgdmResult res = sgdm_step(theta, g, lr, cfg.sgdm_beta, momentum, cfg.box);
        momentum = std::move(res.buffer);
        next = std::move(res.theta);
      }
      if (diag) {
        const Vec gmap = proximal_gradient_mapping(
            theta, prob->smooth_gradient(theta), precond_tilde, lr,
            prob->l1_weight(), cfg.box);
        row.pg_norm_sq = weighted_pg_norm_sq(gmap, precond_tilde);
      }
      if (record) {
        row.delta_sq = dsq;
        if (need_objective) row.var_inc = var_inc[ti];
        rec.rows.push_back(row);
      }
      if (!next.allFinite()) {
        throw NonFiniteError("non-finite iterate at step " + std::to_string(t), t);
      }
      theta = std::move(next);
    }
  } catch (const NonFiniteError& e) {
    rec.diverged = true;
    rec.error = std::string(e.what()) + " (" + ctx + ")";
    return rec;
  }

  if (!cfg.verify.any()) return rec;
  if (rec.plan) {
    rec.bound_note = "bound columns assume a constant stepsize";
    return rec;
  }

  BoundInputs in;
  rec.bounds_available = fill_bound_inputs(cfg, *prob, lr, in, rec.bound_note);
  in.init_err = tracking.empty() ? 0.0 : tracking[0];
  in.gap = std::isnan(rec.gap) ? 0.0 : std::max(rec.gap, 0.0);
  in.drift = *std::max_element(rec.drift.begin(), rec.drift.end());
  rec.bound_inputs = in;
  if (!rec.bounds_available) return rec;

  std::string& note = rec.bound_note;
  if (cfg.verify.hp) {
    if (opt == OptimizerKind::kAdam) {
      std::vector<double> series;
      or_nan([&] {
        series = hp_tracking_series(in, rec.drift, cfg.T - 1);
        return 0.0;
      }, note);
      if (!series.empty()) {
        for (auto& row : rec.rows) row.bound_hp = series[static_cast<std::size_t>(row.t)];
      }
    } else if (opt == OptimizerKind::kSgd) {
      for (auto& row : rec.rows) {
        row.bound_hp = or_nan([&] { return sgd_hp_rhs(in, rec.drift, row.t); }, note);
      }
    }
  }
  if (cfg.verify.exp && opt == OptimizerKind::kAdam) {
    const double dsq_max = in.drift * in.drift;
    for (auto& row : rec.rows) {
      row.bound_exp =
          or_nan([&] { return expected_tracking_rhs(in, dsq_max, row.t); }, note);
    }
  }
  if (cfg.verify.pg && opt == OptimizerKind::kAdam) {
    std::vector<double> budget = variation_budget(var_inc);
    for (auto& row : rec.rows) {
      const double v = budget[static_cast<std::size_t>(row.t)];
      row.bound_pg =
          or_nan([&] { return projected_stationarity_rhs(in, v, row.t + 1); }, note);
    }
  }
  return rec;
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t w = workers > 0 ? static_cast<std::size_t>(workers)
                              : std::max(1u, std::thread::hardware_concurrency());
  w = std::min(w, n);
  std::vector<std::exception_ptr> errors(n);
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void mean_and_sem(const std::vector<std::vector<double>>& series,
                  std::vector<double>& mean, std::vector<double>& sem) {
  mean.clear();
  sem.clear();
  if (series.empty()) return;
  const std::size_t len = series.front().size();
  for (const auto& s : series) {
    if (s.size() != len) throw PreconditionError("series lengths differ");
  }
  const double n = static_cast<double>(series.size());
  mean.assign(len, 0.0);
  sem.assign(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    double m = 0.0;
    for (const auto& s : series) m += s[i];
    m /= n;
    double ss = 0.0;
    for (const auto& s : series) ss += (s[i] - m) * (s[i] - m);
    mean[i] = m;
    sem[i] = series.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
}

Aggregate aggregate_runs(const ExperimentConfig& cfg, OptimizerKind opt,
                         const std::vector<const RunRecord*>& runs) {
  Aggregate agg;
  agg.optimizer = opt;
  const std::string& col = cfg.tune_on;
  double best = kInf;
  for (double lr : cfg.lr_grid) {
    LrScore score;
    score.lr = lr;
    double acc = 0.0;
    for (const RunRecord* r : runs) {
      if (r->lr != lr) continue;
      if (r->diverged) {
        ++score.diverged;
        continue;
      }
      const double tail = tail_mean(r->rows, cfg.T, col);
      if (!std::isfinite(tail)) {
        ++score.diverged;
        continue;
      }
      acc += tail;
    }
    score.tail = score.diverged > 0 ? kInf
                                    : acc / static_cast<double>(cfg.seeds.size());
    agg.scores.push_back(score);
    // Strict comparison keeps the smaller lr on ties.
    if (score.tail < best) {
      best = score.tail;
      agg.chosen_lr = lr;
    }
  }
  if (std::isnan(agg.chosen_lr)) {
    agg.all_diverged = true;
    return agg;
  }
  std::vector<std::vector<double>> curves;
  for (const RunRecord* r : runs) {
    if (r->lr != agg.chosen_lr) continue;
    std::vector<double> c;
    for (const auto& row : r->rows) c.push_back(column_value(row, cfg.plot_column));
    curves.push_back(std::move(c));
    agg.seed_tails.push_back(tail_mean(r->rows, cfg.T, col));
    if (agg.t.empty()) {
      for (const auto& row : r->rows) agg.t.push_back(row.t);
    }
  }
  mean_and_sem(curves, agg.mean, agg.sem);
  agg.tail = best;
  return agg;
}

TuneResult tune_and_aggregate(const ExperimentConfig& cfg, int workers) {
  struct Job {
    OptimizerKind opt;
    double lr;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto opt : cfg.optimizers) {
    for (double lr : cfg.lr_grid) {
      for (auto seed : cfg.seeds) jobs.push_back({opt, lr, seed});
    }
  }
  TuneResult out;
  out.runs.resize(jobs.size());
  parallel_for(jobs.size(), workers < 0 ? cfg.workers : workers,
               [&](std::size_t i) {
                 out.runs[i] = run_single(cfg, jobs[i].opt, jobs[i].lr, jobs[i].seed);
               });
  for (auto opt : cfg.optimizers) {
    std::vector<const RunRecord*> mine;
    for (const auto& r : out.runs) {
      if (r.optimizer == opt) mine.push_back(&r);
    }
    out.aggregates.push_back(aggregate_runs(cfg, opt, mine));
  }
  return out;
}

bool VerificationReport::passed() const {
  const bool hp_ok = !tracking_checked || hp_violation_fraction <= delta;
  const bool rec_ok = !recursion_checked || recursion_violations == 0;
  const bool pg_ok = !pg_checked || pg_runs_violating == 0;
  return hp_ok && eta_violations == 0 && rec_ok && bias_violations == 0 &&
         pg_ok && diverged == 0;
}

VerificationReport verify_bounds(const ExperimentConfig& base, long reps,
                                 int workers) {
  if (reps < 1) throw PreconditionError("reps must be >= 1");
  // Tracking checks (hp, recursion, bias) and the stationarity check are
  // requested through verify.hp and verify.pg; neither set means both.
  const bool none = !base.verify.hp && !base.verify.pg;
  const bool want_track = base.verify.hp || none;
  const bool want_pg = base.verify.pg || none;
  ExperimentConfig cfg = base;
  cfg.eval_every = 1;
  cfg.verify = VerifyFlags{want_track, want_track, want_pg, true};
  const double alpha = cfg.lr_grid.front();

  // Reject before any work when the stepsize is outside a bound's valid range.
  {
    Rng probe_rng = make_stream(0, kDataStream);
    auto probe = make_problem(cfg.problem, probe_rng);
    BoundInputs in;
    std::string note;
    if (!fill_bound_inputs(cfg, *probe, alpha, in, note)) {
      throw PreconditionError("verify: " + note);
    }
    if (want_track) {
      if (std::isnan(in.mu)) {
        throw PreconditionError("verify: no certified mu (set bounds.mu)");
      }
      require_adam_tracking_cap(in);
    }
    if (want_pg && alpha > stationarity_alpha_cap(in)) {
      throw PreconditionError("verify: alpha exceeds the stationarity cap 1/(4 L q_+) = " +
                              format_number(stationarity_alpha_cap(in)));
    }
  }

  std::vector<RunRecord> runs(static_cast<std::size_t>(reps));
  parallel_for(runs.size(), workers < 0 ? cfg.workers : workers,
               [&](std::size_t i) {
                 runs[i] = run_single(cfg, OptimizerKind::kAdam, alpha,
                                      static_cast<std::uint64_t>(i));
               });

  VerificationReport rep;
  rep.reps = reps;
  rep.steps = cfg.T;
  rep.delta = cfg.bounds.delta;
  rep.alpha = alpha;
  rep.tracking_checked = want_track;
  rep.recursion_checked = want_track && cfg.problem.kind == ProblemKind::kQuadratic;
  rep.pg_checked = want_pg;
  for (const auto& r : runs) {
    if (r.diverged) {
      ++rep.diverged;
      continue;
    }
    rep.clip_events += r.clip_events;
    rep.premise_violations += r.premise_violations;
    rep.max_decomposition_gap =
        std::max(rep.max_decomposition_gap, r.max_decomposition_gap);
    const BoundInputs& in = r.bound_inputs;
    const double qm = q_minus(in), qp = q_plus(in);
    const double a = alpha * qm * in.mu;
    const double d1 = d1_constant(in);

    bool hp_bad = false;
    double pg_sum = 0.0;
    for (std::size_t t = 0; t < r.rows.size(); ++t) {
      const StepMetrics& row = r.rows[t];
      const double eb = eta_bound(row.t, in.beta2, in.G, in.eps);
      if (row.eta_norm_sq > eb * (1.0 + 1e-12)) ++rep.eta_violations;
      if (rep.tracking_checked) {
        if (!(row.tracking_err <= row.bound_hp)) hp_bad = true;
        const AdamConstants c = constants(row.t + 1, in);
        if (r.bias_norm[t] > c.c1 * d1 * (1.0 + 1e-12) + 1e-12) ++rep.bias_violations;
      }
      pg_sum += row.pg_norm_sq;
      if (rep.recursion_checked && t + 1 < r.rows.size()) {
        const double lhs = r.rows[t + 1].tracking_err;
        const double rhs = (1.0 - 0.5 * a) * row.tracking_err +
                           5.0 / a * row.delta_sq +
                           10.0 * alpha * qp * qp / (qm * in.mu) * row.r_norm * row.r_norm +
                           10.0 * alpha / (qm * in.mu) * row.eta_norm_sq;
        rep.recursion_max_excess = std::max(rep.recursion_max_excess, lhs - rhs);
        if (lhs - rhs > 1e-9) ++rep.recursion_violations;
      }
    }
    if (hp_bad) ++rep.hp_runs_violating;
    const double avg = pg_sum / static_cast<double>(r.rows.size());
    const double bound = r.rows.back().bound_pg;
    if (!rep.pg_checked) continue;
    if (std::isnan(bound)) {
      throw PreconditionError("verify: stationarity bound unavailable: " + r.bound_note);
    } else {
      rep.pg_worst_ratio = std::max(rep.pg_worst_ratio, avg / bound);
      if (avg > bound) ++rep.pg_runs_violating;
    }
  }
  rep.hp_violation_fraction =
      static_cast<double>(rep.hp_runs_violating) / static_cast<double>(reps);
  return rep;
}

std::string run_file_name(OptimizerKind opt, double lr, std::uint64_t seed) {
  return to_string(opt) + "_lr" + format_number(lr) + "_seed" +
         std::to_string(seed) + ".csv";
}

void persist(const TuneResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": " + ec.message());
  for (const auto& r : result.runs) {
    write_run_csv(dir / run_file_name(r.optimizer, r.lr, r.seed), r.rows);
  }
  for (const auto& a : result.aggregates) {
    if (a.all_diverged) continue;
    const auto path = dir / ("aggregate_" + to_string(a.optimizer) + ".csv");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
    f << "t,mean,sem,n\n";
    for (std::size_t i = 0; i < a.t.size(); ++i) {
      f << a.t[i] << ',' << format_number(a.mean[i]) << ','
        << format_number(a.sem[i]) << ',' << a.seed_tails.size() << '\n';
    }
    if (!f) throw std::runtime_error(path.string() + ": write failed");
  }
}

void write_manifest(const std::filesystem::path& path, const Config& config,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<ManifestEntry>& entries) {
  using nlohmann::json;
  json j;
  j["version"] = version_string();
  j["config"] = config.values();
  j["config_hash"] = config.hash();
  j["seeds"] = seeds;
  json list = json::array();
  for (const auto& e : entries) {
    json je;
    je["regime"] = e.regime;
    je["sweep"] = e.sweep_label;
    je["dir"] = e.subdir;
    json opts = json::object();
    if (e.result) {
      for (const auto& a : e.result->aggregates) {
        json ja;
        ja["all_diverged"] = a.all_diverged;
        ja["chosen_lr"] = a.all_diverged ? json(nullptr) : json(a.chosen_lr);
        ja["tail"] = a.all_diverged ? json(nullptr) : json(a.tail);
        ja["seed_tails"] = a.seed_tails;
        json scores = json::array();
        for (const auto& s : a.scores) {
          scores.push_back({{"lr", s.lr},
                            {"tail", std::isfinite(s.tail) ? json(s.tail) : json(nullptr)},
                            {"diverged", s.diverged}});
        }
        ja["scores"] = scores;
        opts[to_string(a.optimizer)] = ja;
      }
      json errors = json::array();
      for (const auto& r : e.result->runs) {
        if (r.diverged) errors.push_back(r.error);
      }
      je["diverged_runs"] = errors;
    }
    je["optimizers"] = opts;
    list.push_back(je);
  }
  j["entries"] = list;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace adamtrack
