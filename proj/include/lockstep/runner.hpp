#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lockstep/config.hpp"
#include "lockstep/probe.hpp"
#include "lockstep/sequential.hpp"

namespace lockstep {

/// Train/test split of the configured dataset plus the fixed batch partition.
struct PreparedData {
  Dataset train;
  Dataset test;  // rows == 0 when there is no test split
  std::vector<Batch> batches;
};

/// Loads or generates the dataset, carves the test split (the tail of a
/// seed-shuffled permutation) and partitions the training rows.
PreparedData prepare_data(const RunConfig& config);

MlpSpec spec_for(const RunConfig& config, const Dataset& train);

/// Per-category values for one probe step. NaN marks a category that was not
/// probed; with several probes per category the values are averaged.
struct StepSummary {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double first_order[3];
  double delta_L[3];
  double penalty[3];
};

/// Cumulative sums at one probe step, aligned with the loss-reduction axes.
struct TracePoint {
  std::int64_t step = 0;
  double train_loss_running = 0.0;
  LossReduction reduction;
  double sum_first_order[3];
  double sum_delta_L[3];
  double sum_penalty[3];
};

/// Medians and pairwise win rates across probe steps.
struct OrderingStats {
  std::int64_t steps = 0;
  double median_abs_penalty[3] = {0, 0, 0};
  double median_first_order[3] = {0, 0, 0};
  // Fraction of steps (with both categories present) where the ordering holds.
  double rate_abs_penalty_u_ge_r = 0.0;
  double rate_abs_penalty_r_ge_a = 0.0;
  double rate_first_order_u_ge_r = 0.0;
  double rate_first_order_r_ge_a = 0.0;
};

OrderingStats ordering_stats(std::span<const StepSummary> steps);
nlohmann::json to_json(const OrderingStats& s);

struct RunResult {
  bool aborted = false;
  std::string error;
  std::int64_t last_good_step = -1;
  std::int64_t updates = 0;
  std::size_t num_batches = 0;
  std::int64_t ancient_min_age = 0;
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  std::vector<double> final_params;
  std::vector<ProbeRecord> records;
  std::vector<RoundReport> rounds;
  std::vector<StepSummary> summaries;
  std::vector<TracePoint> trace;
  OrderingStats ordering;  // steps after the warmup epochs
  bool accounting_ok = true;
};

/// Cyclic (or per-epoch shuffled) fixed-partition SGD with a constant
/// learning rate. Probes and audits read a snapshot of w and never change the
/// trajectory. When `write_outputs` is set, writes probes.csv, rounds.csv,
/// losses.csv, epochs.csv, pairs.csv, cumulative.csv, report.json and two SVG
/// figures into config.out_dir. A numeric failure aborts the run and is
/// reported in the result rather than thrown; config errors throw ConfigError.
RunResult train(const RunConfig& config, bool write_outputs = true);

/// Interpolates a cumulative series onto `grid` against the running maximum of
/// `x` (the "reduction so far" axis). Grid points beyond the data clamp to the
/// last value.
std::vector<double> align_on_grid(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> grid);

/// Fraction of grid points at which values are nondecreasing in width.
/// `by_width[k][g]` is the value for the k-th (ascending) width at point g.
double monotone_fraction(const std::vector<std::vector<double>>& by_width);

struct SweepResult {
  std::vector<std::size_t> widths;
  std::vector<RunResult> runs;
  std::vector<double> grid;
  // aligned[width][category][quantity][grid point]; quantity 0=first_order, 1=delta_L, 2=penalty.
  std::vector<std::array<std::array<std::vector<double>, 3>, 3>> aligned;
  double monotone_first_order_u = 0.0;
  double monotone_first_order_r = 0.0;
  double monotone_abs_penalty_u = 0.0;
  double monotone_abs_penalty_r = 0.0;
};

/// One run per hidden width (every hidden layer set to that width) with shared
/// seed and partition; cumulative sums aligned on absolute loss reduction over
/// the first `grid_fraction` of the smallest model's range.
SweepResult width_sweep(const RunConfig& base, std::vector<std::size_t> widths,
                        bool write_outputs = true, std::size_t grid_points = 101,
                        double grid_fraction = 0.8);

struct QuadCheckReport {
  std::size_t dim = 0;
  std::size_t trials = 0;
  double eta = 0.0;
  // Worked 2-d instance H=[[2,1],[1,2]], b=0, w=(1,1).
  double worked_penalty = 0.0;
  double worked_individual_reward = 0.0;
  double worked_joint_change = 0.0;
  double worked_joint_penalty = 0.0;
  double max_probe_error = 0.0;        // |penalty + 0.5 d^T H d| / max(1, |0.5 d^T H d|)
  double max_joint_error = 0.0;        // same against the closed-form cross penalty
  double max_linear_abs_penalty = 0.0;
  double max_linear_abs_joint = 0.0;
  bool passed = false;
};

QuadCheckReport quad_check(std::size_t dim, std::size_t trials, double eta, std::uint64_t seed);
nlohmann::json to_json(const QuadCheckReport& r);

struct SeqCompareReport {
  std::string model;
  std::size_t dim = 0;
  double eta = 0.0;
  double loss_start = 0.0;
  double loss_sequential = 0.0;
  double loss_simultaneous = 0.0;
  double distance = 0.0;  // ||w_seq - w_sim||
  RoundReport round;
};

/// Sequential versus simultaneous round from the same start point.
SeqCompareReport seq_compare(const LossModel& model, std::span<const double> w,
                             const Batch& batch, double eta, const AuditOptions& audit,
                             std::optional<std::uint64_t> order_seed, std::string model_name);
nlohmann::json to_json(const SeqCompareReport& r);

/// Column order of probes.csv.
const std::vector<std::string>& probe_csv_columns();
std::string probe_csv_row(const ProbeRecord& r);

}  // namespace lockstep
