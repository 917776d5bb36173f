#include "lockstep/sequential.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lockstep/error.hpp"
#include "lockstep/numeric.hpp"
#include "lockstep/parallel.hpp"
#include "lockstep/rng.hpp"

namespace lockstep {

std::string_view to_string(AuditMode m) { return m == AuditMode::exact ? "exact" : "sampled"; }

AuditMode parse_audit_mode(std::string_view s) {
  if (s == "exact") return AuditMode::exact;
  if (s == "sampled") return AuditMode::sampled;
  throw ConfigError("unknown audit mode '" + std::string(s) + "'");
}

namespace {

void check_inputs(const LossModel& model, std::span<const double> w, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and > 0");
  if (w.size() != model.dim()) throw DimensionError("parameter length does not match model");
}

}  // namespace

std::vector<double> simultaneous_round(const LossModel& model, std::span<const double> w,
                                       const Batch& batch, double eta) {
  check_inputs(model, w, eta);
  const auto g = model.gradient(w, batch);
  auto next = add_scaled(w, -eta, g);
  if (!all_finite(next)) throw NumericFailure("simultaneous round produced non-finite weights");
  return next;
}

std::vector<double> sequential_round(const LossModel& model, std::span<const double> w,
                                     const Batch& batch, double eta,
                                     std::span<const std::size_t> order) {
  check_inputs(model, w, eta);
  const std::size_t d = w.size();
  if (order.size() != d) throw std::invalid_argument("order must list every coordinate once");
  std::vector<bool> seen(d, false);
  for (std::size_t i : order) {
    if (i >= d || seen[i]) throw std::invalid_argument("order is not a permutation of [0, d)");
    seen[i] = true;
  }

  std::vector<double> current(w.begin(), w.end());
  for (std::size_t i : order) {
    const auto g = model.gradient(current, batch);
    current[i] = current[i] - eta * g[i];
    if (!std::isfinite(current[i])) {
      throw NumericFailure("sequential round produced a non-finite weight at coordinate " +
                           std::to_string(i));
    }
  }
  return current;
}

std::vector<double> sequential_round(const LossModel& model, std::span<const double> w,
                                     const Batch& batch, double eta) {
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return sequential_round(model, w, batch, eta, order);
}

RoundReport individual_reward(const LossModel& model, std::span<const double> w,
                              const Batch& batch, double eta, const AuditOptions& opts) {
  check_inputs(model, w, eta);
  const std::size_t d = w.size();

  std::vector<std::size_t> coords;
  RoundReport report;
  report.mode = opts.mode;
  if (opts.mode == AuditMode::exact) {
    if (d > opts.d_max) throw BudgetExceeded(d, opts.d_max);
    coords.resize(d);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    report.scale_factor = 1.0;
  } else {
    if (opts.sample_size < 1 || opts.sample_size > d) {
      throw std::invalid_argument("sample_size must be in [1, d]");
    }
    Rng rng(opts.seed);
    coords = rng.sample_without_replacement(d, opts.sample_size);
    report.scale_factor = static_cast<double>(d) / static_cast<double>(coords.size());
  }

  const auto base = model.loss_and_gradient(w, batch);
  std::vector<double> changes(coords.size());
  std::vector<std::exception_ptr> errors(coords.size());
  const auto n = static_cast<std::int64_t>(coords.size());
#pragma omp parallel num_threads(thread_budget())
  {
    std::vector<double> probe(w.begin(), w.end());
#pragma omp for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
      const std::size_t i = coords[static_cast<std::size_t>(k)];
      try {
        probe[i] = w[i] - eta * base.gradient[i];
        changes[static_cast<std::size_t>(k)] = base.loss - model.loss(probe, batch);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
      probe[i] = w[i];
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const double sum = compensated_sum(changes);
  report.coords_evaluated = coords.size();
  report.individual_reward = opts.mode == AuditMode::exact ? sum : sum * report.scale_factor;
  if (coords.size() > 1) {
    const double mean = sum / static_cast<double>(coords.size());
    CompensatedSum sq;
    for (double c : changes) sq.add((c - mean) * (c - mean));
    report.sample_variance = sq.value() / static_cast<double>(coords.size() - 1);
  }
  if (!std::isfinite(report.individual_reward)) {
    throw NumericFailure("individual reward is non-finite");
  }
  return report;
}

RoundReport joint_penalty(const LossModel& model, std::span<const double> w, const Batch& batch,
                          double eta, const AuditOptions& opts, std::int64_t step) {
  try {
    auto report = individual_reward(model, w, batch, eta, opts);
    const auto next = simultaneous_round(model, w, batch, eta);
    report.step = step;
    report.joint_change = model.loss(w, batch) - model.loss(next, batch);
    report.joint_penalty = report.joint_change - report.individual_reward;
    if (!std::isfinite(report.joint_penalty)) throw NumericFailure("joint penalty is non-finite");
    return report;
  } catch (const NumericFailure& e) {
    throw e.at_step(step);
  }
}

}  // namespace lockstep
