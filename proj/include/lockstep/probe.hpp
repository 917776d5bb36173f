#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lockstep/data.hpp"
#include "lockstep/ledger.hpp"
#include "lockstep/model.hpp"
#include "lockstep/numeric.hpp"

namespace lockstep {

/// One Taylor-decomposition measurement of the step w -> w - eta * grad(B_u)
/// evaluated on probe batch B_p.
///
/// Sign convention: `penalty` = delta_L - first_order is the negated
/// higher-order remainder. A negative penalty means the realized loss drop on
/// B_p fell short of the first-order prediction.
struct ProbeRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::int64_t updating_batch_id = 0;
  std::int64_t probe_batch_id = 0;
  Category category = Category::updating;
  std::int64_t age_steps = 0;
  double loss_before = 0.0;   // L(B_p, w)
  double loss_after = 0.0;    // L(B_p, w - eta * g_u)
  double delta_L = 0.0;       // loss_before - loss_after
  double first_order = 0.0;   // eta * g_u . g_p
  double penalty = 0.0;       // delta_L - first_order
  double grad_norm_u = 0.0;
  double grad_norm_p = 0.0;
  double train_loss_running = 0.0;
};

struct ProbePlan {
  std::int64_t cadence = 1;
  std::int64_t recent_max_age = 1;
  std::int64_t ancient_min_age = 1;
  std::int64_t probes_per_category = 1;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument when cadence or probes_per_category < 1 or
  /// the age window is empty.
  void validate() const;
};

/// Single probe. Does not modify w. Throws NumericFailure (with `step`
/// attached) if any intermediate is non-finite.
ProbeRecord taylor_probe(const LossModel& model, std::span<const double> w, const Batch& updating,
                         const Batch& probe, double eta, std::int64_t step = 0);

struct ProbeStepResult {
  std::vector<ProbeRecord> records;  // ordered by category, then probe batch id
  bool recent_empty = false;
  bool ancient_empty = false;
};

/// Probes the updating batch against itself plus up to probes_per_category
/// batches sampled from the recent and ancient categories. `batches` is indexed
/// by batch id and `ledger` must already record the updating batch at `step`.
/// All records see the same w; probes run concurrently under the thread budget.
ProbeStepResult probe_step(const LossModel& model, std::span<const double> w,
                           const BatchLedger& ledger, std::span<const Batch> batches,
                           std::int64_t updating_batch_id, double eta, const ProbePlan& plan,
                           std::int64_t step);

/// Running totals per category for first_order, delta_L and penalty, plus the
/// per-record values needed for medians.
class ProbeAggregate {
 public:
  struct Totals {
    std::int64_t count = 0;
    double sum_first_order = 0.0;
    double sum_delta_L = 0.0;
    double sum_penalty = 0.0;
    double median_first_order = 0.0;
    double median_delta_L = 0.0;
    double median_penalty = 0.0;
  };

  void add(const ProbeRecord& r);
  void add(std::span<const ProbeRecord> records) {
    for (const auto& r : records) add(r);
  }

  /// Throws std::invalid_argument for Category::none.
  Totals totals(Category c) const;

 private:
  struct Acc {
    std::int64_t count = 0;
    CompensatedSum first_order, delta_L, penalty;
    std::vector<double> first_order_values, delta_L_values, penalty_values;
  };
  std::array<Acc, 3> acc_{};
};

ProbeAggregate aggregate(std::span<const ProbeRecord> records);

struct LossReduction {
  double absolute = 0.0;
  double fraction = 0.0;
};

/// Throws std::invalid_argument unless initial_train_loss > 0.
LossReduction loss_reduction_axes(double initial_train_loss, double current_train_loss);

}  // namespace lockstep
