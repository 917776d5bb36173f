#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lockstep/data.hpp"
#include "lockstep/model.hpp"

namespace lockstep {

enum class AuditMode { exact, sampled };

std::string_view to_string(AuditMode m);
AuditMode parse_audit_mode(std::string_view s);

/// Accounting for one round: what every coordinate would gain by moving alone
/// from w versus what the simultaneous step actually gains.
struct RoundReport {
  std::int64_t step = 0;
  AuditMode mode = AuditMode::exact;
  std::size_t coords_evaluated = 0;
  double individual_reward = 0.0;  // sum_i [L(w) - L(w + delta_i e_i)], scaled in sampled mode
  double joint_change = 0.0;       // L(w) - L(w - eta g)
  double joint_penalty = 0.0;      // joint_change - individual_reward
  double scale_factor = 1.0;       // d / |S| in sampled mode
  double sample_variance = 0.0;    // per-coordinate variance of the sampled changes
};

struct AuditOptions {
  AuditMode mode = AuditMode::exact;
  std::size_t sample_size = 0;     // sampled mode only, 1 <= sample_size <= d
  std::uint64_t seed = 0;
  std::size_t d_max = 20000;       // exact-mode budget of single-coordinate evaluations
};

/// w - eta * gradient(batch, w), one gradient evaluation.
std::vector<double> simultaneous_round(const LossModel& model, std::span<const double> w,
                                       const Batch& batch, double eta);

/// Coordinate-at-a-time round: visits coordinates in `order`, taking each
/// partial derivative at the partially updated vector. Costs d gradient
/// evaluations (one full gradient per coordinate, one entry consumed).
/// Inherently serial. Throws std::invalid_argument if `order` is not a
/// permutation of [0, d).
std::vector<double> sequential_round(const LossModel& model, std::span<const double> w,
                                     const Batch& batch, double eta,
                                     std::span<const std::size_t> order);

/// Natural order 0..d-1.
std::vector<double> sequential_round(const LossModel& model, std::span<const double> w,
                                     const Batch& batch, double eta);

/// Fills mode, coords_evaluated, individual_reward, scale_factor and
/// sample_variance. The per-coordinate loss evaluations run concurrently and
/// are summed in coordinate order. Throws BudgetExceeded in exact mode when
/// d > d_max.
RoundReport individual_reward(const LossModel& model, std::span<const double> w,
                              const Batch& batch, double eta, const AuditOptions& opts);

/// Complete report: individual reward, the simultaneous step's loss change and
/// their difference.
RoundReport joint_penalty(const LossModel& model, std::span<const double> w, const Batch& batch,
                          double eta, const AuditOptions& opts, std::int64_t step = 0);

}  // namespace lockstep
