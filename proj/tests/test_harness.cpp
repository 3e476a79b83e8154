#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "adamtrack/harness.hpp"

using namespace adamtrack;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quadratic_cfg() {
  ExperimentConfig c;
  c.name = "unit";
  c.T = 200;
  c.eval_every = 10;
  c.lr_grid = {0.01, 0.03, 0.1};
  c.problem.kind = ProblemKind::kQuadratic;
  c.problem.d = 8;
  c.problem.mu = 0.5;
  c.problem.L = 2.0;
  c.drift = ScheduleSpec::constant(0.01);
  c.noise = ScheduleSpec::log(0.05);
  return c;
}

}  // namespace

TEST(Harness, RunIsDeterministic) {
  const auto c = quadratic_cfg();
  const auto a = run_single(c, OptimizerKind::kAdam, 0.03, 5);
  const auto b = run_single(c, OptimizerKind::kAdam, 0.03, 5);
  EXPECT_EQ(run_csv_string(a.rows), run_csv_string(b.rows));
  EXPECT_EQ(a.drift, b.drift);
  EXPECT_EQ(a.rows.size(), 20u);
}

TEST(Harness, OptimizersShareTheTargetPath) {
  const auto c = quadratic_cfg();
  const auto a = run_single(c, OptimizerKind::kAdam, 0.03, 2);
  const auto s = run_single(c, OptimizerKind::kSgd, 0.1, 2);
  EXPECT_EQ(a.drift, s.drift);
}

TEST(Harness, WorkerCountDoesNotChangeResults) {
  const auto c = quadratic_cfg();
  const auto one = tune_and_aggregate(c, 1);
  const auto many = tune_and_aggregate(c, 4);
  ASSERT_EQ(one.runs.size(), many.runs.size());
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    EXPECT_EQ(run_csv_string(one.runs[i].rows), run_csv_string(many.runs[i].rows));
  }
  for (std::size_t k = 0; k < one.aggregates.size(); ++k) {
    EXPECT_EQ(one.aggregates[k].chosen_lr, many.aggregates[k].chosen_lr);
    EXPECT_EQ(one.aggregates[k].mean, many.aggregates[k].mean);
    EXPECT_EQ(one.aggregates[k].sem, many.aggregates[k].sem);
  }
}

TEST(Harness, TuningRecomputesFromRuns) {
  const auto c = quadratic_cfg();
  const auto res = tune_and_aggregate(c, 1);
  for (const auto& agg : res.aggregates) {
    double best = INFINITY, best_lr = NAN;
    for (double lr : c.lr_grid) {
      double acc = 0.0;
      for (const auto& r : res.runs) {
        if (r.optimizer == agg.optimizer && r.lr == lr) acc += tail_mean(r.rows, c.T, "metric");
      }
      acc /= static_cast<double>(c.seeds.size());
      if (acc < best) best = acc, best_lr = lr;
    }
    EXPECT_EQ(agg.chosen_lr, best_lr);
    EXPECT_DOUBLE_EQ(agg.tail, best);
    // Mean and SEM across the chosen runs, recomputed by hand.
    std::vector<const RunRecord*> chosen;
    for (const auto& r : res.runs) {
      if (r.optimizer == agg.optimizer && r.lr == agg.chosen_lr) chosen.push_back(&r);
    }
    ASSERT_EQ(chosen.size(), 3u);
    for (std::size_t i = 0; i < agg.t.size(); ++i) {
      double m = 0.0, ss = 0.0;
      for (auto* r : chosen) m += r->rows[i].metric;
      m /= 3.0;
      for (auto* r : chosen) ss += std::pow(r->rows[i].metric - m, 2);
      EXPECT_NEAR(agg.mean[i], m, 1e-12 * std::max(1.0, m));
      EXPECT_NEAR(agg.sem[i], std::sqrt(ss / 2.0) / std::sqrt(3.0), 1e-12 * std::max(1.0, m));
    }
  }
}

TEST(Harness, TailUsesSecondHalf) {
  std::vector<StepMetrics> rows(4);
  for (int i = 0; i < 4; ++i) {
    rows[i].t = 25 * i;
    rows[i].metric = i + 1.0;
  }
  EXPECT_DOUBLE_EQ(tail_mean(rows, 100, "metric"), 3.5);  // t = 50, 75
}

TEST(Harness, SingleLrGridIsChosen) {
  auto c = quadratic_cfg();
  c.lr_grid = {0.05};
  c.seeds = {4};
  const auto res = tune_and_aggregate(c, 1);
  for (const auto& agg : res.aggregates) {
    EXPECT_EQ(agg.chosen_lr, 0.05);
    for (double s : agg.sem) EXPECT_EQ(s, 0.0);
  }
}

TEST(Harness, DivergingRunIsRecordedNotFatal) {
  auto c = quadratic_cfg();
  c.problem.mu = c.problem.L = 1.0;
  c.clip_norm = 1e300;
  c.box = ProjectionSpec::none();
  c.T = 3000;
  c.lr_grid = {0.1, 3.0};
  c.optimizers = {OptimizerKind::kSgd};
  const auto res = tune_and_aggregate(c, 1);
  long diverged = 0;
  for (const auto& r : res.runs) {
    if (r.diverged) {
      ++diverged;
      EXPECT_NE(r.error.find("lr 3"), std::string::npos);
    }
  }
  EXPECT_EQ(diverged, 3);
  EXPECT_EQ(res.aggregates[0].chosen_lr, 0.1);
  EXPECT_TRUE(std::isinf(res.aggregates[0].scores[1].tail));
}

TEST(Harness, ClippingBoundsEachMove) {
  // Post-clip ||g|| <= clip, so the distance to the target moves by at most
  // lr * clip + the drift per SGD step.
  auto c = quadratic_cfg();
  c.problem.start_scale = 30.0;
  c.clip_norm = 0.5;
  c.eval_every = 1;
  c.box = ProjectionSpec::none();
  const double lr = 0.1;
  const auto r = run_single(c, OptimizerKind::kSgd, lr, 0);
  EXPECT_GT(r.clip_events, 0);
  for (std::size_t t = 0; t + 1 < r.rows.size(); ++t) {
    const double step = std::abs(std::sqrt(r.rows[t + 1].tracking_err) -
                                 std::sqrt(r.rows[t].tracking_err));
    EXPECT_LE(step, lr * c.clip_norm + r.drift[t] + 1e-12);
  }
}

TEST(Harness, VerifyRejectsStepsizeAboveCap) {
  auto c = quadratic_cfg();
  c.problem.mu = c.problem.L = 1.0;
  c.adam.eps = 1.0;
  c.box = ProjectionSpec::none();
  c.lr_grid = {1.5 / 44.0};
  c.verify.hp = true;
  EXPECT_THROW(verify_bounds(c, 2), PreconditionError);
  c.verify = VerifyFlags{};
  c.verify.pg = true;
  c.problem.L = c.problem.mu = 10.0;
  c.lr_grid = {0.03};  // stationarity cap eps / (4 L) = 0.025
  EXPECT_THROW(verify_bounds(c, 2), PreconditionError);
}

TEST(Harness, VerifyPassesAtCap) {
  auto c = quadratic_cfg();
  c.T = 100;
  c.problem.mu = c.problem.L = 1.0;
  c.adam.eps = 1.0;
  c.box = ProjectionSpec::none();
  c.lr_grid = {1.0 / 44.0};
  c.bounds.delta = 0.1;
  const auto rep = verify_bounds(c, 4, 2);
  EXPECT_TRUE(rep.tracking_checked);
  EXPECT_TRUE(rep.recursion_checked);
  EXPECT_EQ(rep.eta_violations, 0);
  EXPECT_EQ(rep.recursion_violations, 0);
  EXPECT_EQ(rep.bias_violations, 0);
  EXPECT_LT(rep.max_decomposition_gap, 1e-10);
  EXPECT_TRUE(rep.passed());
}

TEST(Harness, StepDecayFollowsPlan) {
  auto c = quadratic_cfg();
  c.T = 3000;
  c.problem.d = 20;
  c.problem.mu = c.problem.L = 1.0;
  c.problem.init_scale = 0.7;
  c.adam.eps = 1.0;
  c.box = ProjectionSpec::none();
  c.drift = ScheduleSpec::constant(0.01);
  c.noise = ScheduleSpec::constant(0.1);
  c.optimizers = {OptimizerKind::kAdam};
  c.decay = true;
  c.decay_alpha_star = 0.005;
  c.bounds.multiplier = 1e-7;
  c.verify.hp = true;
  const auto r = run_single(c, OptimizerKind::kAdam, 0.02, 1);
  ASSERT_TRUE(r.plan.has_value());
  EXPECT_EQ(r.plan->epochs(), 3);  // 0.02 -> 0.0125 -> 0.00875
  EXPECT_DOUBLE_EQ(r.plan->alphas[1], 0.0125);
  EXPECT_EQ(r.bound_note, "bound columns assume a constant stepsize");
  for (const auto& row : r.rows) EXPECT_TRUE(std::isnan(row.bound_hp));
  c.decay_alpha_star = 0.05;
  const auto bad = [&] { run_single(c, OptimizerKind::kAdam, 0.02, 1); };
  EXPECT_THROW(bad(), PreconditionError);
}

TEST(Harness, PersistWritesRunsAndManifest) {
  auto c = quadratic_cfg();
  c.T = 40;
  c.lr_grid = {0.01};
  const auto res = tune_and_aggregate(c, 1);
  const fs::path dir = fs::temp_directory_path() / "adamtrack_persist_test";
  fs::remove_all(dir);
  persist(res, dir);
  for (const auto& r : res.runs) {
    const auto back = read_run_csv(dir / run_file_name(r.optimizer, r.lr, r.seed));
    EXPECT_EQ(run_csv_string(back), run_csv_string(r.rows));
  }
  EXPECT_TRUE(fs::exists(dir / "aggregate_adam.csv"));
  EXPECT_TRUE(fs::exists(dir / "aggregate_sgd.csv"));
  EXPECT_EQ(run_file_name(OptimizerKind::kSgd, 0.003, 2), "sgd_lr0.003_seed2.csv");

  const Config cfg = Config::parse("experiment.name = unit\n", "mem");
  write_manifest(dir / "manifest.json", cfg, c.seeds, {{"", "", ".", &res}});
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["config_hash"], cfg.hash());
  EXPECT_EQ(j["seeds"].size(), 3u);
  fs::remove_all(dir);
}

TEST(Harness, ParallelForRethrowsLowestIndex) {
  std::vector<int> hit(20, 0);
  parallel_for(20, 3, [&](std::size_t i) { hit[i] = 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  try {
    parallel_for(10, 2, [](std::size_t i) {
      if (i == 3 || i == 7) throw std::runtime_error("job " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "job 3");
  }
}
