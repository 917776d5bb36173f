#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "lockstep/csv.hpp"
#include "lockstep/error.hpp"
#include "lockstep/parallel.hpp"
#include "lockstep/runner.hpp"
#include "lockstep/surfaces.hpp"

using namespace lockstep;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "lockstep_test_runner" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunConfig small_config(const std::string& name) {
  RunConfig c;
  c.dataset = BlobsSource{3, 100, 8, 3.0, 5};
  c.model.hidden = {16};
  c.eta = 0.1;
  c.batch_size = 10;
  c.epochs = 2;
  c.seed = 3;
  c.out_dir = scratch(name).string();
  return c;
}

struct Captured {
  int code;
  std::string out;
};

Captured run_cli(const std::string& args) {
  const std::string cmd = std::string(LOCKSTEP_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

}  // namespace

TEST(Train, RejectsInvalidConfigBeforeWork) {
  auto c = small_config("invalid");
  c.epochs = 0;
  EXPECT_THROW(train(c), ConfigError);
  c = small_config("invalid2");
  c.batch_size = 1000;
  EXPECT_THROW(train(c), ConfigError);
  // Two batches leave no room between recent (age 1) and ancient (age >= K/2 = 1).
  c = small_config("invalid3");
  c.batch_size = 100;
  EXPECT_THROW(train(c), ConfigError);
  EXPECT_TRUE(fs::is_empty(c.out_dir));
}

TEST(Train, BlobsHidden16TwoEpochsDescends) {
  const auto r = train(small_config("descend"));
  EXPECT_FALSE(r.aborted);
  EXPECT_LT(r.final_train_loss, r.initial_train_loss);
}

TEST(Train, UpdateCountAndProbeLayout) {
  const auto c = small_config("layout");
  const auto r = train(c);
  const auto data = prepare_data(c);
  // 300 rows, 10% test split -> 270 training rows -> 27 batches.
  EXPECT_EQ(data.train.rows, 270u);
  EXPECT_EQ(data.test.rows, 30u);
  EXPECT_EQ(r.num_batches, 27u);
  EXPECT_EQ(r.updates, 27 * 2);
  EXPECT_EQ(r.ancient_min_age, 13);
  EXPECT_EQ(r.summaries.size(), 54u);

  const auto probes = CsvTable::read(fs::path(c.out_dir) / "probes.csv");
  EXPECT_EQ(probes.header(), probe_csv_columns());
  EXPECT_EQ(probes.rows(), r.records.size());
  const auto delta = probes.numeric_column("delta_L");
  const auto first = probes.numeric_column("first_order");
  const auto pen = probes.numeric_column("penalty");
  for (std::size_t i = 0; i < probes.rows(); ++i) EXPECT_EQ(pen[i], delta[i] - first[i]) << "row " << i;
  EXPECT_TRUE(r.accounting_ok);

  for (const char* f : {"losses.csv", "epochs.csv", "pairs.csv", "cumulative.csv", "report.json",
                        "fig_penalty.svg", "fig_dot.svg", "fig_cumulative.svg"}) {
    EXPECT_TRUE(fs::exists(fs::path(c.out_dir) / f)) << f;
  }
  EXPECT_FALSE(fs::exists(fs::path(c.out_dir) / "rounds.csv"));
  EXPECT_EQ(CsvTable::read(fs::path(c.out_dir) / "losses.csv").rows(), 54u);

  const auto report = json::parse(slurp(fs::path(c.out_dir) / "report.json"));
  EXPECT_EQ(report["config"], to_json(c));
  EXPECT_EQ(report["updates"], 54);
  EXPECT_TRUE(report["checks"]["accounting_identity"].get<bool>());
  EXPECT_TRUE(report["checks"]["update_count"].get<bool>());
}

TEST(Train, CategoriesFollowTheCycle) {
  const auto r = train(small_config("cycle"));
  for (const auto& rec : r.records) {
    switch (rec.category) {
      case Category::updating: EXPECT_EQ(rec.age_steps, 0); break;
      case Category::recent: EXPECT_EQ(rec.age_steps, 1); break;
      case Category::ancient: EXPECT_GE(rec.age_steps, 13); break;
      case Category::none: ADD_FAILURE() << "uncategorized probe"; break;
    }
  }
  // The first epoch's ledger is cold: no ancient batches until step 13.
  for (const auto& rec : r.records) {
    if (rec.category == Category::ancient) {
      EXPECT_GE(rec.step, 13);
    }
  }
}

TEST(Train, IdenticalConfigGivesByteIdenticalOutputs) {
  auto a = small_config("det-a");
  auto b = small_config("det-b");
  train(a);
  set_thread_budget(3);
  train(b);
  set_thread_budget(0);
  for (const char* f : {"probes.csv", "pairs.csv", "cumulative.csv", "losses.csv", "fig_penalty.svg"}) {
    EXPECT_EQ(slurp(fs::path(a.out_dir) / f), slurp(fs::path(b.out_dir) / f)) << f;
  }
  auto ja = json::parse(slurp(fs::path(a.out_dir) / "report.json"));
  auto jb = json::parse(slurp(fs::path(b.out_dir) / "report.json"));
  ja["config"].erase("out_dir");
  jb["config"].erase("out_dir");
  EXPECT_EQ(ja, jb);
}

TEST(Train, ProbesDoNotPerturbTheTrajectory) {
  auto on = small_config("purity-on");
  auto off = small_config("purity-off");
  off.probe.enabled = false;
  on.audit = AuditConfig{7, AuditMode::sampled, 20, 20000};
  const auto a = train(on);
  const auto b = train(off);
  EXPECT_EQ(a.final_params, b.final_params);
  EXPECT_TRUE(b.records.empty());
  EXPECT_EQ(a.rounds.size(), 8u);  // steps 0, 7, ..., 49
  const auto rounds = CsvTable::read(fs::path(on.out_dir) / "rounds.csv");
  EXPECT_EQ(rounds.rows(), 8u);
  EXPECT_EQ(rounds.cell(0, rounds.column_index("mode")), "sampled");
}

TEST(Train, ShuffledOrderIsSeeded) {
  auto a = small_config("shuf-a");
  auto b = small_config("shuf-b");
  auto cyc = small_config("shuf-c");
  a.order = b.order = BatchOrder::shuffled;
  const auto ra = train(a, false);
  const auto rb = train(b, false);
  const auto rc = train(cyc, false);
  EXPECT_EQ(ra.final_params, rb.final_params);
  EXPECT_NE(ra.final_params, rc.final_params);
}

TEST(Train, NumericFailureAbortsWithLastGoodStep) {
  auto c = small_config("blowup");
  c.eta = 1e300;
  const auto r = train(c);
  EXPECT_TRUE(r.aborted);
  EXPECT_FALSE(r.error.empty());
  EXPECT_LT(r.last_good_step, 53);
  EXPECT_EQ(r.updates, r.last_good_step + 1);
  const auto report = json::parse(slurp(fs::path(c.out_dir) / "report.json"));
  EXPECT_TRUE(report["aborted"].get<bool>());
}

TEST(Align, SelfAlignmentIsIdentity) {
  std::vector<double> x{0.0, 0.1, 0.25, 0.3, 0.7, 1.0};
  std::vector<double> y{0.0, 1.0, 2.0, 2.5, 3.0, 4.0};
  const auto out = align_on_grid(x, y, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i], y[i], 1e-12);
}

TEST(Align, InterpolatesOnRunningMaximumAndClamps) {
  // x dips back to 0.5 after reaching 1; the running maximum stays at 1.
  std::vector<double> x{0.0, 1.0, 0.5, 2.0};
  std::vector<double> y{0.0, 10.0, 11.0, 30.0};
  std::vector<double> grid{0.5, 1.5, 5.0, -1.0};
  const auto out = align_on_grid(x, y, grid);
  EXPECT_DOUBLE_EQ(out[0], 5.0);
  EXPECT_DOUBLE_EQ(out[1], 20.5);
  EXPECT_DOUBLE_EQ(out[2], 30.0);
  EXPECT_DOUBLE_EQ(out[3], 0.0);
  EXPECT_THROW(align_on_grid(x, std::vector<double>{1.0}, grid), DimensionError);
}

TEST(Monotone, FractionOfNondecreasingPoints) {
  // Columns: (1,1,2) holds, (2,3,3) holds, (3,2,4) fails, (4,5,4) fails.
  EXPECT_DOUBLE_EQ(monotone_fraction({{1, 2, 3, 4}, {1, 3, 2, 5}, {2, 3, 4, 4}}), 0.5);
  EXPECT_DOUBLE_EQ(monotone_fraction({{1, std::nan("")}, {2, 3}}), 0.5);
  EXPECT_DOUBLE_EQ(monotone_fraction({}), 0.0);
}

TEST(Sweep, SharedPartitionAndArtifacts) {
  auto base = small_config("sweep");
  const auto s = width_sweep(base, {8, 4}, true, 11, 0.8);
  EXPECT_EQ(s.widths, (std::vector<std::size_t>{4, 8}));
  ASSERT_EQ(s.runs.size(), 2u);
  EXPECT_EQ(s.grid.size(), 11u);
  EXPECT_EQ(s.grid.front(), 0.0);
  for (std::size_t w = 0; w < 2; ++w) {
    for (int c = 0; c < 3; ++c) {
      for (int q = 0; q < 3; ++q) EXPECT_EQ(s.aligned[w][c][q].size(), 11u);
    }
  }
  // Same seed, same partition: the updating batch sequence is identical.
  ASSERT_EQ(s.runs[0].records.size() > 0, true);
  std::vector<std::int64_t> ua, ub;
  for (const auto& r : s.runs[0].records) {
    if (r.category == Category::updating) ua.push_back(r.updating_batch_id);
  }
  for (const auto& r : s.runs[1].records) {
    if (r.category == Category::updating) ub.push_back(r.updating_batch_id);
  }
  EXPECT_EQ(ua, ub);
  const fs::path dir(base.out_dir);
  EXPECT_TRUE(fs::exists(dir / "w4" / "probes.csv"));
  EXPECT_TRUE(fs::exists(dir / "w8" / "probes.csv"));
  const auto aligned = CsvTable::read(dir / "sweep_aligned.csv");
  EXPECT_EQ(aligned.header().size(), 1u + 2u * 9u);
  EXPECT_TRUE(aligned.has_column("w8_u_penalty"));
  const auto svg = slurp(dir / "fig_sweep.svg");
  std::size_t panels = 0;
  for (auto p = svg.find("<g class=\"panel\">"); p != std::string::npos; p = svg.find("<g class=\"panel\">", p + 1)) ++panels;
  EXPECT_EQ(panels, 9u);
  EXPECT_THROW(width_sweep(base, {8}, false), ConfigError);
}

TEST(QuadCheck, WorkedInstanceAndDegenerateCases) {
  const auto r = quad_check(20, 10, 0.1, 1);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.worked_penalty, -0.27, 1e-14);
  EXPECT_NEAR(r.worked_joint_penalty, -0.09, 1e-14);
  EXPECT_NEAR(r.worked_individual_reward, 1.62, 1e-14);
  const auto one = quad_check(1, 10, 0.1, 2);
  EXPECT_EQ(one.max_joint_error, 0.0);
  EXPECT_THROW(quad_check(0, 1, 0.1, 0), std::invalid_argument);
}

TEST(SeqCompare, WorkedInstanceReport) {
  const SurfaceModel m(QuadraticSurface(2, {2, 1, 1, 2}, {0, 0}, 0.0));
  const auto r = seq_compare(m, std::vector<double>{1, 1}, Batch{0, {}}, 0.1,
                             AuditOptions{AuditMode::exact, 0, 0, 100}, std::nullopt, "worked");
  EXPECT_NEAR(r.loss_simultaneous, 1.47, 1e-14);
  EXPECT_NEAR(r.loss_sequential, 0.5 * (2 * 0.49 + 2 * 0.7 * 0.73 + 2 * 0.73 * 0.73), 1e-14);
  EXPECT_NEAR(r.distance, 0.03, 1e-14);
  EXPECT_NEAR(r.round.joint_penalty, -0.09, 1e-14);
  EXPECT_EQ(to_json(r)["model"], "worked");
}

TEST(Cli, QuadCheckSucceeds) {
  const auto r = run_cli("quad-check --dim 5 --trials 3");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["passed"].get<bool>());
}

TEST(Cli, ConfigErrorGivesJsonLineAndNonzeroExit) {
  const auto dir = scratch("cli-bad");
  std::ofstream(dir / "bad.json") << R"({"eta": -1})";
  const auto r = run_cli("--config " + (dir / "bad.json").string() + " train");
  EXPECT_EQ(r.code, 2);
  const auto line = json::parse(r.out);
  EXPECT_EQ(line["error"], "config");
  EXPECT_NE(line["message"].get<std::string>().find("eta"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run_cli("frobnicate");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.out)["error"], "usage");
}

TEST(Cli, TrainWithSeedOverrideAndNumericFailureExit) {
  const auto dir = scratch("cli-train");
  std::ofstream(dir / "c.json") << R"({"dataset": {"kind": "blobs", "classes": 3, "per_class": 50, "dim": 4},
                                      "model": {"hidden": [8]}, "batch_size": 10, "epochs": 1, "seed": 1})";
  const auto ok = run_cli("--config " + (dir / "c.json").string() + " --out " + (dir / "o").string() + " --seed 9 train");
  EXPECT_EQ(ok.code, 0) << ok.out;
  const auto report = json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_EQ(report["config"]["seed"], 9);
  EXPECT_EQ(report["config"]["out_dir"], (dir / "o").string());

  std::ofstream(dir / "boom.json") << R"({"dataset": {"kind": "blobs", "classes": 3, "per_class": 50, "dim": 4},
                                         "model": {"hidden": [8]}, "batch_size": 10, "epochs": 1, "eta": 1e300})";
  const auto boom = run_cli("--config " + (dir / "boom.json").string() + " --out " + (dir / "b").string() + " train");
  EXPECT_EQ(boom.code, 3);
  const auto last = boom.out.substr(boom.out.rfind('{', boom.out.size() - 2));
  EXPECT_EQ(json::parse(last)["error"], "numeric");
}

TEST(Cli, PlotNamesMissingColumn) {
  const auto dir = scratch("cli-plot");
  std::ofstream(dir / "in.csv") << "a,b\n1,2\n3,4\n";
  const auto ok = run_cli("plot --csv " + (dir / "in.csv").string() + " --svg " + (dir / "o.svg").string() +
                          " --x a --y b --y-equals-x");
  EXPECT_EQ(ok.code, 0) << ok.out;
  const auto bad = run_cli("plot --csv " + (dir / "in.csv").string() + " --svg " + (dir / "o.svg").string() +
                           " --x a --y zzz");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("zzz"), std::string::npos);
}
