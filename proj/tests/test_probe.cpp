#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "lockstep/data.hpp"
#include "lockstep/error.hpp"
#include "lockstep/mlp.hpp"
#include "lockstep/model.hpp"
#include "lockstep/parallel.hpp"
#include "lockstep/probe.hpp"
#include "lockstep/rng.hpp"
#include "lockstep/surfaces.hpp"

using namespace lockstep;

namespace {

SurfaceModel worked_model() { return SurfaceModel(QuadraticSurface(2, {2, 1, 1, 2}, {0, 0}, 0.0)); }

std::vector<Batch> empty_batches(std::size_t k) {
  std::vector<Batch> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i].batch_id = static_cast<std::int64_t>(i);
  return out;
}

std::vector<std::vector<double>> random_shifts(std::size_t k, std::size_t d, Rng& rng) {
  std::vector<std::vector<double>> out(k, std::vector<double>(d));
  for (auto& s : out) {
    for (auto& v : s) v = rng.uniform(-1, 1);
  }
  return out;
}

}  // namespace

TEST(TaylorProbe, WorkedInstance) {
  const auto m = worked_model();
  const std::vector<double> w{1, 1};
  const Batch b{0, {}};
  const auto r = taylor_probe(m, w, b, b, 0.1, 4);
  EXPECT_EQ(r.step, 4);
  EXPECT_EQ(r.category, Category::updating);
  EXPECT_DOUBLE_EQ(r.loss_before, 3.0);
  EXPECT_NEAR(r.loss_after, 1.47, 1e-14);
  EXPECT_NEAR(r.delta_L, 1.53, 1e-14);
  EXPECT_NEAR(r.first_order, 1.8, 1e-14);
  EXPECT_NEAR(r.penalty, -0.27, 1e-14);
  EXPECT_NEAR(r.grad_norm_u, std::sqrt(18.0), 1e-14);
  EXPECT_EQ(r.penalty, r.delta_L - r.first_order);
}

// With per-batch linear shifts, B_u and B_p have different gradients but the
// same Hessian, so the penalty is still -0.5 d^T H d with d = -eta g_u.
TEST(TaylorProbe, CrossBatchQuadraticOracleProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.below(15);
    const auto surface = QuadraticSurface::random(d, rng.below(1u << 30));
    const SurfaceModel m(surface, random_shifts(2, d, rng));
    std::vector<double> w(d);
    for (auto& v : w) v = rng.uniform(-1, 1);
    const double eta = rng.uniform(0.001, 0.2);
    const Batch bu{0, {}}, bp{1, {}};
    const auto r = taylor_probe(m, w, bu, bp, eta);
    EXPECT_EQ(r.category, Category::none);
    auto delta = m.gradient(w, bu);
    for (auto& v : delta) v *= -eta;
    const double expected = -exact_higher_order(surface, delta);
    EXPECT_NEAR(r.penalty, expected, 1e-12 * std::max(1.0, std::fabs(expected)));
    EXPECT_EQ(r.penalty, r.delta_L - r.first_order);
  }
}

TEST(TaylorProbe, LinearLossHasNoPenalty) {
  const SurfaceModel m(QuadraticSurface::linear({0.3, -2, 5}, 1.0));
  const std::vector<double> w{1, 2, 3};
  const auto r = taylor_probe(m, w, Batch{0, {}}, Batch{0, {}}, 0.05);
  EXPECT_LE(std::fabs(r.penalty), 1e-12);
}

TEST(TaylorProbe, ZeroStepMeasuresNothing) {
  const auto r = taylor_probe(worked_model(), std::vector<double>{1, 1}, Batch{0, {}}, Batch{0, {}}, 0.0);
  EXPECT_EQ(r.delta_L, 0.0);
  EXPECT_EQ(r.first_order, 0.0);
  EXPECT_EQ(r.penalty, 0.0);
}

TEST(TaylorProbe, Errors) {
  const auto m = worked_model();
  EXPECT_THROW(taylor_probe(m, std::vector<double>{1}, Batch{}, Batch{}, 0.1), DimensionError);
  EXPECT_THROW(taylor_probe(m, std::vector<double>{1, 1}, Batch{}, Batch{}, -0.1), std::invalid_argument);
  try {
    taylor_probe(m, std::vector<double>{1e200, 1e200}, Batch{}, Batch{}, 0.1, 17);
    FAIL() << "expected NumericFailure";
  } catch (const NumericFailure& e) {
    ASSERT_TRUE(e.step().has_value());
    EXPECT_EQ(*e.step(), 17);
  }
}

TEST(ProbePlan, Validation) {
  EXPECT_NO_THROW((ProbePlan{1, 1, 2, 1, 0}.validate()));
  EXPECT_THROW((ProbePlan{0, 1, 2, 1, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((ProbePlan{1, 0, 2, 1, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((ProbePlan{1, 2, 2, 1, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((ProbePlan{1, 1, 2, 0, 0}.validate()), std::invalid_argument);
}

TEST(ProbeStep, CyclicScheduleStepThirty) {
  const std::size_t K = 50;
  Rng rng(8);
  const SurfaceModel m(QuadraticSurface::random(4, 1), random_shifts(K, 4, rng));
  const auto batches = empty_batches(K);
  BatchLedger ledger(K);
  for (std::int64_t s = 0; s <= 30; ++s) ledger.mark_used(s, s);
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  const ProbePlan plan{1, 1, 25, 3, 99};
  const auto res = probe_step(m, w, ledger, batches, 30, 0.1, plan, 30);
  EXPECT_FALSE(res.recent_empty);
  EXPECT_FALSE(res.ancient_empty);
  ASSERT_EQ(res.records.size(), 1u + 1u + 3u);
  EXPECT_EQ(res.records[0].category, Category::updating);
  EXPECT_EQ(res.records[0].probe_batch_id, 30);
  EXPECT_EQ(res.records[0].age_steps, 0);
  EXPECT_EQ(res.records[1].category, Category::recent);
  EXPECT_EQ(res.records[1].probe_batch_id, 29);
  EXPECT_EQ(res.records[1].age_steps, 1);
  std::set<std::int64_t> ancient;
  for (std::size_t i = 2; i < res.records.size(); ++i) {
    const auto& r = res.records[i];
    EXPECT_EQ(r.category, Category::ancient);
    EXPECT_LE(r.probe_batch_id, 5);
    EXPECT_EQ(r.age_steps, 30 - r.probe_batch_id);
    ancient.insert(r.probe_batch_id);
  }
  EXPECT_EQ(ancient.size(), 3u);
  for (const auto& r : res.records) {
    EXPECT_EQ(r.step, 30);
    EXPECT_EQ(r.updating_batch_id, 30);
    EXPECT_EQ(r.penalty, r.delta_L - r.first_order);
  }
  // Each record equals a standalone probe with the same batches.
  for (const auto& r : res.records) {
    const auto solo = taylor_probe(m, w, batches[30], batches[static_cast<std::size_t>(r.probe_batch_id)], 0.1, 30);
    EXPECT_EQ(r.loss_after, solo.loss_after);
    EXPECT_EQ(r.first_order, solo.first_order);
    EXPECT_EQ(r.penalty, solo.penalty);
  }
}

TEST(ProbeStep, ColdStartHasEmptyCategories) {
  const auto m = worked_model();
  const auto batches = empty_batches(4);
  BatchLedger ledger(4);
  ledger.mark_used(0, 0);
  const auto res = probe_step(m, std::vector<double>{1, 1}, ledger, batches, 0, 0.1, ProbePlan{1, 1, 2, 1, 0}, 0);
  EXPECT_TRUE(res.recent_empty);
  EXPECT_TRUE(res.ancient_empty);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_NEAR(res.records[0].penalty, -0.27, 1e-14);
}

TEST(ProbeStep, SamplingIsSeededAndThreadCountInvariant) {
  const std::size_t K = 20;
  const auto data = gen_blobs(4, 50, 8, 2.0, 3);
  const auto batches = make_partition(data.rows, 10, 4);
  const MlpModel m(MlpSpec({8, 16, 4}, Activation::relu, LossKind::softmax_cross_entropy), data);
  const auto w = init_params(m.spec(), 6);
  BatchLedger ledger(K);
  for (std::int64_t s = 0; s < 40; ++s) ledger.mark_used(s % static_cast<std::int64_t>(K), s);
  const ProbePlan plan{1, 2, 10, 2, 1234};
  set_thread_budget(1);
  const auto a = probe_step(m, w.values(), ledger, batches, 19, 0.1, plan, 39);
  set_thread_budget(3);
  const auto b = probe_step(m, w.values(), ledger, batches, 19, 0.1, plan, 39);
  set_thread_budget(0);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].probe_batch_id, b.records[i].probe_batch_id);
    EXPECT_EQ(a.records[i].penalty, b.records[i].penalty);
    EXPECT_EQ(a.records[i].first_order, b.records[i].first_order);
  }
  const auto c = probe_step(m, w.values(), ledger, batches, 19, 0.1, ProbePlan{1, 2, 10, 2, 4321}, 39);
  ASSERT_EQ(c.records.size(), a.records.size());
}

TEST(ProbeStep, Errors) {
  const auto m = worked_model();
  const auto batches = empty_batches(4);
  BatchLedger ledger(4);
  ledger.mark_used(0, 0);
  const std::vector<double> w{1, 1};
  const ProbePlan plan{1, 1, 2, 1, 0};
  EXPECT_THROW(probe_step(m, w, ledger, batches, 1, 0.1, plan, 0), std::invalid_argument);
  EXPECT_THROW(probe_step(m, w, BatchLedger(3), batches, 0, 0.1, plan, 0), DimensionError);
  EXPECT_THROW(probe_step(m, w, ledger, batches, 0, 0.1, ProbePlan{1, 1, 1, 1, 0}, 0), std::invalid_argument);
}

// Dyadic values sum exactly in double, so plain integer arithmetic on the
// numerators is the oracle.
TEST(Aggregate, ExactDyadicOracleProperty) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ProbeRecord> records;
    std::array<std::int64_t, 3> fo_num{0, 0, 0}, pen_num{0, 0, 0};
    std::array<std::int64_t, 3> count{0, 0, 0};
    const std::size_t n = rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      ProbeRecord r;
      const auto c = rng.below(3);
      r.category = static_cast<Category>(c);
      const auto f = static_cast<std::int64_t>(rng.below(2001)) - 1000;
      const auto p = static_cast<std::int64_t>(rng.below(2001)) - 1000;
      r.first_order = static_cast<double>(f) / 64.0;
      r.penalty = static_cast<double>(p) / 64.0;
      r.delta_L = r.first_order + r.penalty;
      fo_num[c] += f;
      pen_num[c] += p;
      ++count[c];
      records.push_back(r);
    }
    const auto agg = aggregate(records);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto t = agg.totals(static_cast<Category>(c));
      EXPECT_EQ(t.count, count[c]);
      EXPECT_EQ(t.sum_first_order, static_cast<double>(fo_num[c]) / 64.0);
      EXPECT_EQ(t.sum_penalty, static_cast<double>(pen_num[c]) / 64.0);
      EXPECT_EQ(t.sum_delta_L, static_cast<double>(fo_num[c] + pen_num[c]) / 64.0);
    }
  }
}

TEST(Aggregate, MediansAndNoneCategory) {
  std::vector<ProbeRecord> rs(3);
  for (int i = 0; i < 3; ++i) {
    rs[static_cast<std::size_t>(i)].category = Category::recent;
    rs[static_cast<std::size_t>(i)].penalty = -static_cast<double>(i);
  }
  const auto t = aggregate(rs).totals(Category::recent);
  EXPECT_EQ(t.median_penalty, -1.0);
  EXPECT_EQ(aggregate(rs).totals(Category::ancient).count, 0);
  EXPECT_THROW(aggregate(rs).totals(Category::none), std::invalid_argument);
}

TEST(LossReduction, AbsoluteAndFraction) {
  const auto r = loss_reduction_axes(2.0, 0.5);
  EXPECT_EQ(r.absolute, 1.5);
  EXPECT_EQ(r.fraction, 0.75);
  EXPECT_THROW(loss_reduction_axes(0.0, 0.0), std::invalid_argument);
}
