#include "lockstep/probe.hpp"

#include <cmath>
#include <exception>
#include <stdexcept>

#include "lockstep/error.hpp"
#include "lockstep/parallel.hpp"
#include "lockstep/rng.hpp"

namespace lockstep {

void ProbePlan::validate() const {
  if (cadence < 1) throw std::invalid_argument("probe cadence must be >= 1");
  if (probes_per_category < 1) throw std::invalid_argument("probes_per_category must be >= 1");
  if (recent_max_age < 1) throw std::invalid_argument("recent_max_age must be >= 1");
  if (recent_max_age >= ancient_min_age) {
    throw std::invalid_argument("recent_max_age must be < ancient_min_age");
  }
}

namespace {

// Everything that depends only on (w, B_u, eta).
struct UpdateContext {
  LossAndGradient at_u;
  std::vector<double> stepped;  // w - eta * g_u
  double grad_norm_u = 0.0;
};

UpdateContext prepare_update(const LossModel& model, std::span<const double> w,
                             const Batch& updating, double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and >= 0");
  if (w.size() != model.dim()) throw DimensionError("probe: parameter length does not match model");
  if (!all_finite(w)) throw NumericFailure("probe: non-finite parameters");
  UpdateContext ctx;
  ctx.at_u = model.loss_and_gradient(w, updating);
  ctx.stepped = add_scaled(w, -eta, ctx.at_u.gradient);
  ctx.grad_norm_u = norm(ctx.at_u.gradient);
  if (!all_finite(ctx.stepped)) throw NumericFailure("probe: non-finite stepped parameters");
  return ctx;
}

ProbeRecord measure(const LossModel& model, std::span<const double> w, const UpdateContext& ctx,
                    const Batch& updating, const Batch& probe, double eta) {
  ProbeRecord r;
  r.updating_batch_id = updating.batch_id;
  r.probe_batch_id = probe.batch_id;

  // The self-probe reuses the updating batch's evaluation; the results are
  // bitwise what a fresh call would return.
  LossAndGradient fresh;
  const LossAndGradient* at_p = &ctx.at_u;
  if (probe.batch_id != updating.batch_id || probe.indices != updating.indices) {
    fresh = model.loss_and_gradient(w, probe);
    at_p = &fresh;
  }
  r.loss_before = at_p->loss;
  r.loss_after = model.loss(ctx.stepped, probe);
  r.delta_L = r.loss_before - r.loss_after;
  r.first_order = eta * dot(ctx.at_u.gradient, at_p->gradient);
  r.penalty = r.delta_L - r.first_order;
  r.grad_norm_u = ctx.grad_norm_u;
  r.grad_norm_p = at_p == &ctx.at_u ? ctx.grad_norm_u : norm(at_p->gradient);

  for (double v : {r.loss_before, r.loss_after, r.delta_L, r.first_order, r.penalty,
                   r.grad_norm_p}) {
    if (!std::isfinite(v)) throw NumericFailure("probe: non-finite measurement");
  }
  return r;
}

}  // namespace

ProbeRecord taylor_probe(const LossModel& model, std::span<const double> w, const Batch& updating,
                         const Batch& probe, double eta, std::int64_t step) {
  try {
    const auto ctx = prepare_update(model, w, updating, eta);
    auto r = measure(model, w, ctx, updating, probe, eta);
    r.step = step;
    r.category = probe.batch_id == updating.batch_id ? Category::updating : Category::none;
    return r;
  } catch (const NumericFailure& e) {
    throw e.at_step(step);
  }
}

ProbeStepResult probe_step(const LossModel& model, std::span<const double> w,
                           const BatchLedger& ledger, std::span<const Batch> batches,
                           std::int64_t updating_batch_id, double eta, const ProbePlan& plan,
                           std::int64_t step) {
  plan.validate();
  if (batches.size() != ledger.num_batches()) {
    throw DimensionError("probe_step: ledger and batch list disagree on the batch count");
  }
  const auto cats = categorize(ledger, step, plan.recent_max_age, plan.ancient_min_age);
  const auto u = static_cast<std::size_t>(updating_batch_id);
  if (u >= batches.size() || cats[u] != Category::updating) {
    throw std::invalid_argument("probe_step: updating batch must have age 0 in the ledger");
  }

  struct Target {
    std::size_t batch;
    Category category;
  };
  std::vector<Target> targets{{u, Category::updating}};

  ProbeStepResult result;
  const std::array<Category, 2> sampled{Category::recent, Category::ancient};
  for (std::size_t ci = 0; ci < sampled.size(); ++ci) {
    std::vector<std::size_t> candidates;
    for (std::size_t b = 0; b < cats.size(); ++b) {
      if (cats[b] == sampled[ci]) candidates.push_back(b);
    }
    if (candidates.empty()) {
      (ci == 0 ? result.recent_empty : result.ancient_empty) = true;
      continue;
    }
    Rng rng(derive_seed(plan.rng_seed, static_cast<std::uint64_t>(step) * 2 + ci));
    const auto picks = rng.sample_without_replacement(
        candidates.size(), static_cast<std::size_t>(plan.probes_per_category));
    for (std::size_t p : picks) targets.push_back({candidates[p], sampled[ci]});
  }

  UpdateContext ctx;
  try {
    ctx = prepare_update(model, w, batches[u], eta);
  } catch (const NumericFailure& e) {
    throw e.at_step(step);
  }

  result.records.resize(targets.size());
  std::vector<std::exception_ptr> errors(targets.size());
  const auto n = static_cast<std::int64_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_budget())
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& t = targets[static_cast<std::size_t>(i)];
    try {
      auto r = measure(model, w, ctx, batches[u], batches[t.batch], eta);
      r.step = step;
      r.category = t.category;
      r.age_steps = ledger.age(static_cast<std::int64_t>(t.batch), step).value_or(0);
      result.records[static_cast<std::size_t>(i)] = r;
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const NumericFailure& nf) {
      throw nf.at_step(step);
    }
  }
  return result;
}

namespace {

std::size_t slot(Category c) {
  switch (c) {
    case Category::updating: return 0;
    case Category::recent: return 1;
    case Category::ancient: return 2;
    case Category::none: break;
  }
  throw std::invalid_argument("probe aggregate: category 'none' has no totals");
}

}  // namespace

void ProbeAggregate::add(const ProbeRecord& r) {
  auto& a = acc_[slot(r.category)];
  ++a.count;
  a.first_order.add(r.first_order);
  a.delta_L.add(r.delta_L);
  a.penalty.add(r.penalty);
  a.first_order_values.push_back(r.first_order);
  a.delta_L_values.push_back(r.delta_L);
  a.penalty_values.push_back(r.penalty);
}

ProbeAggregate::Totals ProbeAggregate::totals(Category c) const {
  const auto& a = acc_[slot(c)];
  Totals t;
  t.count = a.count;
  t.sum_first_order = a.first_order.value();
  t.sum_delta_L = a.delta_L.value();
  t.sum_penalty = a.penalty.value();
  t.median_first_order = median(a.first_order_values);
  t.median_delta_L = median(a.delta_L_values);
  t.median_penalty = median(a.penalty_values);
  return t;
}

ProbeAggregate aggregate(std::span<const ProbeRecord> records) {
  ProbeAggregate agg;
  agg.add(records);
  return agg;
}

LossReduction loss_reduction_axes(double initial_train_loss, double current_train_loss) {
  if (!(initial_train_loss > 0.0)) {
    throw std::invalid_argument("loss_reduction_axes: initial train loss must be > 0");
  }
  const double absolute = initial_train_loss - current_train_loss;
  return {absolute, absolute / initial_train_loss};
}

}  // namespace lockstep
