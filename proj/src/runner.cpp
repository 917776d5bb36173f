#include "lockstep/runner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "lockstep/csv.hpp"
#include "lockstep/error.hpp"
#include "lockstep/plot.hpp"
#include "lockstep/rng.hpp"
#include "lockstep/surfaces.hpp"

namespace lockstep {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::array<const char*, 3> kCatSuffix{"u", "r", "a"};

// Salts for the child seeds derived from RunConfig::seed.
constexpr std::uint64_t kSplitSalt = 11;
constexpr std::uint64_t kPartitionSalt = 12;
constexpr std::uint64_t kProbeSalt = 13;
constexpr std::uint64_t kEpochOrderSalt = 1000;

int cat_index(Category c) {
  switch (c) {
    case Category::updating: return 0;
    case Category::recent: return 1;
    case Category::ancient: return 2;
    case Category::none: break;
  }
  return -1;
}

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

Batch all_rows(const Dataset& d) {
  Batch b;
  b.batch_id = -1;
  b.indices.resize(d.rows);
  std::iota(b.indices.begin(), b.indices.end(), std::size_t{0});
  return b;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
  Dataset full;
  Dataset official_test;
  if (const auto* b = std::get_if<BlobsSource>(&config.dataset)) {
    full = gen_blobs(b->classes, b->per_class, b->dim, b->separation, b->seed);
  } else {
    const auto& m = std::get<MnistSource>(config.dataset);
    full = load_mnist_idx(m.images, m.labels);
    if (m.subset_n > 0 && m.subset_n < full.rows) {
      std::vector<std::size_t> head(m.subset_n);
      std::iota(head.begin(), head.end(), std::size_t{0});
      full = full.subset(head, "mnist");
    }
    if (!m.test_images.empty()) official_test = load_mnist_idx(m.test_images, m.test_labels);
  }
  full.validate();

  PreparedData out;
  const bool carve = official_test.rows == 0;
  const std::size_t n_test =
      carve ? static_cast<std::size_t>(std::floor(config.test_split_fraction * static_cast<double>(full.rows)))
            : 0;
  Rng rng(derive_seed(config.seed, kSplitSalt));
  const auto perm = rng.permutation(full.rows);
  const std::span<const std::size_t> all(perm);
  out.train = full.subset(all.first(full.rows - n_test), full.name + "-train");
  if (carve) {
    out.test = full.subset(all.subspan(full.rows - n_test), full.name + "-test");
  } else {
    out.test = std::move(official_test);
  }
  if (config.batch_size > out.train.rows) {
    throw ConfigError("batch_size " + std::to_string(config.batch_size) + " exceeds the " +
                      std::to_string(out.train.rows) + " training rows");
  }
  out.batches = make_partition(out.train.rows, config.batch_size,
                               derive_seed(config.seed, kPartitionSalt));
  return out;
}

MlpSpec spec_for(const RunConfig& config, const Dataset& train) {
  std::vector<std::size_t> widths{train.dim};
  widths.insert(widths.end(), config.model.hidden.begin(), config.model.hidden.end());
  widths.push_back(train.num_classes > 0 ? train.num_classes : 1);
  return MlpSpec(std::move(widths), config.model.activation, config.model.loss);
}

const std::vector<std::string>& probe_csv_columns() {
  static const std::vector<std::string> cols{
      "step",        "epoch",       "updating_batch_id", "probe_batch_id", "category",
      "age_steps",   "loss_before", "loss_after",        "delta_L",        "first_order",
      "penalty",     "grad_norm_u", "grad_norm_p",       "train_loss_running"};
  return cols;
}

std::string probe_csv_row(const ProbeRecord& r) {
  std::ostringstream s;
  s << r.step << ',' << r.epoch << ',' << r.updating_batch_id << ',' << r.probe_batch_id << ','
    << to_string(r.category) << ',' << r.age_steps << ',' << format_double(r.loss_before) << ','
    << format_double(r.loss_after) << ',' << format_double(r.delta_L) << ','
    << format_double(r.first_order) << ',' << format_double(r.penalty) << ','
    << format_double(r.grad_norm_u) << ',' << format_double(r.grad_norm_p) << ','
    << format_double(r.train_loss_running);
  return s.str();
}

OrderingStats ordering_stats(std::span<const StepSummary> steps) {
  OrderingStats s;
  s.steps = static_cast<std::int64_t>(steps.size());
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pen, fo;
    for (const auto& st : steps) {
      if (!std::isnan(st.penalty[c])) pen.push_back(std::fabs(st.penalty[c]));
      if (!std::isnan(st.first_order[c])) fo.push_back(st.first_order[c]);
    }
    s.median_abs_penalty[c] = median(pen);
    s.median_first_order[c] = median(fo);
  }
  auto rate = [&](auto value, int hi, int lo) {
    std::int64_t both = 0, wins = 0;
    for (const auto& st : steps) {
      const double a = value(st, hi), b = value(st, lo);
      if (std::isnan(a) || std::isnan(b)) continue;
      ++both;
      if (a >= b) ++wins;
    }
    return both == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(both);
  };
  auto abs_pen = [](const StepSummary& st, int c) { return std::fabs(st.penalty[c]); };
  auto first = [](const StepSummary& st, int c) { return st.first_order[c]; };
  s.rate_abs_penalty_u_ge_r = rate(abs_pen, 0, 1);
  s.rate_abs_penalty_r_ge_a = rate(abs_pen, 1, 2);
  s.rate_first_order_u_ge_r = rate(first, 0, 1);
  s.rate_first_order_r_ge_a = rate(first, 1, 2);
  return s;
}

json to_json(const OrderingStats& s) {
  return {{"steps", s.steps},
          {"median_abs_penalty", {{"updating", s.median_abs_penalty[0]},
                                  {"recent", s.median_abs_penalty[1]},
                                  {"ancient", s.median_abs_penalty[2]}}},
          {"median_first_order", {{"updating", s.median_first_order[0]},
                                  {"recent", s.median_first_order[1]},
                                  {"ancient", s.median_first_order[2]}}},
          {"rate_abs_penalty_u_ge_r", s.rate_abs_penalty_u_ge_r},
          {"rate_abs_penalty_r_ge_a", s.rate_abs_penalty_r_ge_a},
          {"rate_first_order_u_ge_r", s.rate_first_order_u_ge_r},
          {"rate_first_order_r_ge_a", s.rate_first_order_r_ge_a}};
}

namespace {

json totals_json(const ProbeAggregate& agg) {
  json out;
  for (Category c : {Category::updating, Category::recent, Category::ancient}) {
    const auto t = agg.totals(c);
    out[std::string(to_string(c))] = {{"count", t.count},
                                      {"sum_first_order", t.sum_first_order},
                                      {"sum_delta_L", t.sum_delta_L},
                                      {"sum_penalty", t.sum_penalty},
                                      {"median_first_order", t.median_first_order},
                                      {"median_delta_L", t.median_delta_L},
                                      {"median_penalty", t.median_penalty}};
  }
  return out;
}

bool row_accounting_holds(const ProbeRecord& r) {
  if (r.penalty != r.delta_L - r.first_order) return false;
  const double dl = parse_double(format_double(r.delta_L));
  const double fo = parse_double(format_double(r.first_order));
  return parse_double(format_double(r.penalty)) == dl - fo;
}

void write_outputs_for(const RunConfig& config, const MlpSpec& spec, const PreparedData& data,
                       const RunResult& result, const std::vector<std::string>& loss_rows,
                       const std::vector<std::string>& epoch_rows, std::uint64_t probe_seed) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);

  {
    auto out = open_out(dir / "probes.csv");
    const auto& cols = probe_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : result.records) out << probe_csv_row(r) << '\n';
  }
  if (config.audit) {
    auto out = open_out(dir / "rounds.csv");
    out << "step,mode,coords_evaluated,individual_reward,joint_change,joint_penalty,scale_factor\n";
    for (const auto& r : result.rounds) {
      out << r.step << ',' << to_string(r.mode) << ',' << r.coords_evaluated << ','
          << format_double(r.individual_reward) << ',' << format_double(r.joint_change) << ','
          << format_double(r.joint_penalty) << ',' << format_double(r.scale_factor) << '\n';
    }
  }
  {
    auto out = open_out(dir / "losses.csv");
    out << "step,epoch,batch_id,batch_loss,train_loss_running\n";
    for (const auto& row : loss_rows) out << row << '\n';
  }
  {
    auto out = open_out(dir / "epochs.csv");
    out << "epoch,train_loss,test_loss\n";
    for (const auto& row : epoch_rows) out << row << '\n';
  }
  {
    auto out = open_out(dir / "pairs.csv");
    out << "step,epoch,first_order_u,first_order_r,first_order_a,delta_L_u,delta_L_r,delta_L_a,"
           "penalty_u,penalty_r,penalty_a\n";
    for (const auto& s : result.summaries) {
      out << s.step << ',' << s.epoch;
      for (const double* arr : {s.first_order, s.delta_L, s.penalty}) {
        for (int c = 0; c < 3; ++c) out << ',' << cell(arr[c]);
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "cumulative.csv");
    out << "step,train_loss_running,reduction_abs,reduction_frac";
    for (const char* q : {"first_order", "delta_L", "penalty"}) {
      for (const char* c : kCatSuffix) out << ",sum_" << q << '_' << c;
    }
    out << '\n';
    for (const auto& t : result.trace) {
      out << t.step << ',' << format_double(t.train_loss_running) << ','
          << format_double(t.reduction.absolute) << ',' << format_double(t.reduction.fraction);
      for (const double* arr : {t.sum_first_order, t.sum_delta_L, t.sum_penalty}) {
        for (int c = 0; c < 3; ++c) out << ',' << format_double(arr[c]);
      }
      out << '\n';
    }
  }

  Figure penalties{"Penalty (delta_L - first_order) by batch category", 2,
                   {{"recent vs long-ago updating batch", PanelKind::scatter, "penalty_a", {"penalty_r"}, true},
                    {"updating vs recent batch", PanelKind::scatter, "penalty_r", {"penalty_u"}, true}}};
  plot(dir / "pairs.csv", penalties, dir / "fig_penalty.svg");
  Figure dots{"First-order term eta * g_u . g_p by batch category", 2,
              {{"recent vs long-ago updating batch", PanelKind::scatter, "first_order_a", {"first_order_r"}, true},
               {"updating vs recent batch", PanelKind::scatter, "first_order_r", {"first_order_u"}, true}}};
  plot(dir / "pairs.csv", dots, dir / "fig_dot.svg");
  Figure cumulative{"Cumulative sums vs reduction in training loss", 3, {}};
  for (const char* c : {"a", "r", "u"}) {
    for (const char* q : {"first_order", "delta_L", "penalty"}) {
      const std::string col = std::string("sum_") + q + "_" + c;
      cumulative.panels.push_back({col, PanelKind::line, "reduction_abs", {col}, false});
    }
  }
  plot(dir / "cumulative.csv", cumulative, dir / "fig_cumulative.svg");

  const std::int64_t expected_updates =
      static_cast<std::int64_t>(data.batches.size()) * config.epochs;
  json report;
  report["config"] = to_json(config);
  report["resolved"] = {{"train_rows", data.train.rows},
                        {"test_rows", data.test.rows},
                        {"num_batches", data.batches.size()},
                        {"layer_widths", spec.layer_widths()},
                        {"param_count", spec.param_count()},
                        {"recent_max_age", config.probe.recent_max_age},
                        {"ancient_min_age", result.ancient_min_age},
                        {"probe_cadence", config.probe.cadence},
                        {"probe_rng_seed", probe_seed}};
  report["losses"] = {{"initial_train", result.initial_train_loss},
                      {"final_train", result.final_train_loss},
                      {"final_test", data.test.rows ? json(result.final_test_loss) : json(nullptr)}};
  report["updates"] = result.updates;
  report["aborted"] = result.aborted;
  report["last_good_step"] = result.last_good_step;
  report["error"] = result.error;
  report["ordering_after_warmup"] = to_json(result.ordering);
  report["totals"] = totals_json(aggregate(result.records));
  if (config.audit) {
    CompensatedSum jp;
    for (const auto& r : result.rounds) jp.add(r.joint_penalty);
    json variances = json::array();
    for (const auto& r : result.rounds) variances.push_back(r.sample_variance);
    report["audits"] = {{"count", result.rounds.size()},
                        {"mean_joint_penalty", result.rounds.empty() ? 0.0 : jp.value() / result.rounds.size()},
                        {"sample_variance", variances}};
  }
  report["checks"] = {{"accounting_identity", result.accounting_ok},
                      {"update_count", result.aborted || result.updates == expected_updates},
                      {"expected_updates", expected_updates}};
  report["sign_convention"] =
      "penalty = delta_L - first_order; negative means the realized loss drop fell short of the "
      "first-order prediction";
  auto out = open_out(dir / "report.json");
  out << report.dump(2) << '\n';
}

}  // namespace

RunResult train(const RunConfig& config, bool write_outputs) {
  config.validate();
  const auto data = prepare_data(config);
  const auto spec = spec_for(config, data.train);
  const MlpModel model(spec, data.train);
  const std::size_t num_batches = data.batches.size();

  RunResult result;
  result.num_batches = num_batches;
  result.ancient_min_age = config.probe.ancient_min_age.value_or(static_cast<std::int64_t>(num_batches / 2));
  const std::uint64_t probe_seed = config.probe.rng_seed.value_or(derive_seed(config.seed, kProbeSalt));
  const ProbePlan plan{config.probe.cadence, config.probe.recent_max_age, result.ancient_min_age,
                       config.probe.probes_per_category, probe_seed};
  if (config.probe.enabled) {
    try {
      plan.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("probe plan with ") + std::to_string(num_batches) +
                        " batches: " + e.what());
    }
  }
  std::optional<AuditOptions> audit;
  if (config.audit) {
    audit = AuditOptions{config.audit->mode, config.audit->sample_size, 0, config.audit->d_max};
    if (audit->mode == AuditMode::sampled && audit->sample_size > spec.param_count()) {
      throw ConfigError("audit.sample_size exceeds the parameter count");
    }
    if (audit->mode == AuditMode::exact && spec.param_count() > audit->d_max) {
      throw ConfigError("exact audit refused: d = " + std::to_string(spec.param_count()) +
                        " exceeds d_max = " + std::to_string(audit->d_max));
    }
  }

  ParamVector w = init_params(spec, config.seed);
  const Batch everything = all_rows(data.train);
  BatchLedger ledger(num_batches);
  std::deque<double> window;
  std::vector<std::string> loss_rows, epoch_rows;
  std::array<CompensatedSum, 3> cum_first, cum_delta, cum_penalty;
  std::vector<StepSummary> post_warmup;

  std::int64_t step = 0;
  try {
    result.initial_train_loss = model.loss(w.values(), everything);
    for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
      std::vector<std::size_t> order(num_batches);
      std::iota(order.begin(), order.end(), std::size_t{0});
      if (config.order == BatchOrder::shuffled) {
        Rng rng(derive_seed(config.seed, kEpochOrderSalt + static_cast<std::uint64_t>(epoch)));
        order = rng.permutation(num_batches);
      }
      for (std::size_t pos : order) {
        const Batch& updating = data.batches[pos];
        ledger.mark_used(updating.batch_id, step);

        LossAndGradient at_u;
        try {
          at_u = model.loss_and_gradient(w.values(), updating);
        } catch (const NumericFailure& e) {
          throw e.at_step(step);
        }
        window.push_back(at_u.loss);
        if (window.size() > num_batches) window.pop_front();
        CompensatedSum ws;
        for (double v : window) ws.add(v);
        const double running = ws.value() / static_cast<double>(window.size());
        loss_rows.push_back(std::to_string(step) + "," + std::to_string(epoch) + "," +
                            std::to_string(updating.batch_id) + "," + format_double(at_u.loss) +
                            "," + format_double(running));

        if (config.probe.enabled && step % plan.cadence == 0) {
          auto probed = probe_step(model, w.values(), ledger, data.batches, updating.batch_id,
                                   config.eta, plan, step);
          StepSummary summary{step, epoch, {kNaN, kNaN, kNaN}, {kNaN, kNaN, kNaN}, {kNaN, kNaN, kNaN}};
          std::array<int, 3> counts{0, 0, 0};
          for (auto& r : probed.records) {
            r.epoch = epoch;
            r.train_loss_running = running;
            if (!row_accounting_holds(r)) result.accounting_ok = false;
            const int c = cat_index(r.category);
            cum_first[c].add(r.first_order);
            cum_delta[c].add(r.delta_L);
            cum_penalty[c].add(r.penalty);
            if (counts[c]++ == 0) {
              summary.first_order[c] = summary.delta_L[c] = summary.penalty[c] = 0.0;
            }
            summary.first_order[c] += r.first_order;
            summary.delta_L[c] += r.delta_L;
            summary.penalty[c] += r.penalty;
            result.records.push_back(r);
          }
          for (int c = 0; c < 3; ++c) {
            if (counts[c] > 1) {
              summary.first_order[c] /= counts[c];
              summary.delta_L[c] /= counts[c];
              summary.penalty[c] /= counts[c];
            }
          }
          result.summaries.push_back(summary);
          if (epoch >= config.probe.warmup_epochs) post_warmup.push_back(summary);

          TracePoint tp;
          tp.step = step;
          tp.train_loss_running = running;
          tp.reduction = loss_reduction_axes(result.initial_train_loss, running);
          for (int c = 0; c < 3; ++c) {
            tp.sum_first_order[c] = cum_first[c].value();
            tp.sum_delta_L[c] = cum_delta[c].value();
            tp.sum_penalty[c] = cum_penalty[c].value();
          }
          result.trace.push_back(tp);
        }

        if (audit && step % config.audit->every_k_steps == 0) {
          AuditOptions opts = *audit;
          opts.seed = derive_seed(config.seed, static_cast<std::uint64_t>(step) + 0x5eed);
          result.rounds.push_back(joint_penalty(model, w.values(), updating, config.eta, opts, step));
        }

        try {
          w.add_scaled(-config.eta, at_u.gradient);
        } catch (const NumericFailure& e) {
          throw e.at_step(step);
        }
        result.last_good_step = step;
        ++result.updates;
        ++step;
      }
      result.final_train_loss = model.loss(w.values(), everything);
      if (data.test.rows > 0) {
        const MlpModel test_model(spec, data.test);
        result.final_test_loss = test_model.loss(w.values(), all_rows(data.test));
      }
      epoch_rows.push_back(std::to_string(epoch) + "," + format_double(result.final_train_loss) +
                           "," + (data.test.rows ? format_double(result.final_test_loss) : ""));
    }
  } catch (const NumericFailure& e) {
    result.aborted = true;
    result.error = e.what();
  }

  result.ordering = ordering_stats(post_warmup);
  result.final_params.assign(w.values().begin(), w.values().end());
  if (write_outputs) {
    write_outputs_for(config, spec, data, result, loss_rows, epoch_rows, probe_seed);
  }
  return result;
}

std::vector<double> align_on_grid(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> grid) {
  if (x.size() != y.size()) throw DimensionError("align_on_grid: x and y lengths differ");
  std::vector<double> out(grid.size(), kNaN);
  if (x.empty()) return out;
  std::vector<double> envelope(x.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    best = std::max(best, x[i]);
    envelope[i] = best;
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double target = grid[g];
    const auto it = std::lower_bound(envelope.begin(), envelope.end(), target);
    if (it == envelope.end()) {
      out[g] = y.back();
      continue;
    }
    const auto t = static_cast<std::size_t>(it - envelope.begin());
    if (t == 0) {
      out[g] = y[0];
      continue;
    }
    const double x0 = envelope[t - 1], x1 = envelope[t];
    const double frac = (target - x0) / (x1 - x0);
    out[g] = y[t - 1] + (y[t] - y[t - 1]) * frac;
  }
  return out;
}

double monotone_fraction(const std::vector<std::vector<double>>& by_width) {
  if (by_width.empty() || by_width.front().empty()) return 0.0;
  const std::size_t points = by_width.front().size();
  std::size_t ok = 0;
  for (std::size_t g = 0; g < points; ++g) {
    bool holds = true;
    for (std::size_t k = 0; k + 1 < by_width.size(); ++k) {
      const double a = by_width[k][g], b = by_width[k + 1][g];
      if (std::isnan(a) || std::isnan(b) || a > b) {
        holds = false;
        break;
      }
    }
    if (holds) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(points);
}

SweepResult width_sweep(const RunConfig& base, std::vector<std::size_t> widths,
                        bool write_outputs, std::size_t grid_points, double grid_fraction) {
  if (widths.size() < 2) throw ConfigError("width sweep needs at least 2 widths");
  if (grid_points < 2) throw ConfigError("width sweep needs at least 2 grid points");
  std::sort(widths.begin(), widths.end());
  SweepResult sweep;
  sweep.widths = widths;

  for (std::size_t width : widths) {
    RunConfig cfg = base;
    if (cfg.model.hidden.empty()) cfg.model.hidden = {width};
    for (auto& h : cfg.model.hidden) h = width;
    cfg.out_dir = (std::filesystem::path(base.out_dir) / ("w" + std::to_string(width))).string();
    sweep.runs.push_back(train(cfg, write_outputs));
    if (sweep.runs.back().aborted) {
      throw NumericFailure("width " + std::to_string(width) + " run aborted: " + sweep.runs.back().error);
    }
  }

  auto max_reduction = [](const RunResult& r) {
    double best = 0.0;
    for (const auto& t : r.trace) best = std::max(best, t.reduction.absolute);
    return best;
  };
  double grid_max = grid_fraction * max_reduction(sweep.runs.front());
  for (const auto& r : sweep.runs) grid_max = std::min(grid_max, max_reduction(r));
  sweep.grid.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    sweep.grid[g] = grid_max * static_cast<double>(g) / static_cast<double>(grid_points - 1);
  }

  for (const auto& run : sweep.runs) {
    std::vector<double> x;
    for (const auto& t : run.trace) x.push_back(t.reduction.absolute);
    std::array<std::array<std::vector<double>, 3>, 3> aligned;
    for (int c = 0; c < 3; ++c) {
      std::vector<double> fo, dl, pen;
      for (const auto& t : run.trace) {
        fo.push_back(t.sum_first_order[c]);
        dl.push_back(t.sum_delta_L[c]);
        pen.push_back(t.sum_penalty[c]);
      }
      aligned[c][0] = align_on_grid(x, fo, sweep.grid);
      aligned[c][1] = align_on_grid(x, dl, sweep.grid);
      aligned[c][2] = align_on_grid(x, pen, sweep.grid);
    }
    sweep.aligned.push_back(std::move(aligned));
  }

  auto collect = [&](int c, int q, bool absolute) {
    std::vector<std::vector<double>> out;
    for (const auto& a : sweep.aligned) {
      auto v = a[c][q];
      if (absolute) {
        for (double& e : v) e = std::fabs(e);
      }
      out.push_back(std::move(v));
    }
    return out;
  };
  sweep.monotone_first_order_u = monotone_fraction(collect(0, 0, false));
  sweep.monotone_first_order_r = monotone_fraction(collect(1, 0, false));
  sweep.monotone_abs_penalty_u = monotone_fraction(collect(0, 2, true));
  sweep.monotone_abs_penalty_r = monotone_fraction(collect(1, 2, true));

  if (write_outputs) {
    const std::filesystem::path dir(base.out_dir);
    std::filesystem::create_directories(dir);
    const std::array<const char*, 3> qty{"first_order", "delta_L", "penalty"};
    {
      auto out = open_out(dir / "sweep_aligned.csv");
      out << "reduction_abs";
      for (std::size_t w : widths) {
        for (const char* c : kCatSuffix) {
          for (const char* q : qty) out << ",w" << w << '_' << c << '_' << q;
        }
      }
      out << '\n';
      for (std::size_t g = 0; g < sweep.grid.size(); ++g) {
        out << format_double(sweep.grid[g]);
        for (const auto& a : sweep.aligned) {
          for (int c = 0; c < 3; ++c) {
            for (int q = 0; q < 3; ++q) out << ',' << cell(a[c][q][g]);
          }
        }
        out << '\n';
      }
    }
    Figure fig{"Cumulative sums by hidden width vs reduction in training loss", 3, {}};
    const std::array<int, 3> row_order{2, 1, 0};  // long-ago, recent, updating
    const std::array<const char*, 3> titles{"sum eta g_u.g_", "sum delta_L_", "sum penalty_"};
    for (int c : row_order) {
      for (int q = 0; q < 3; ++q) {
        Panel p{std::string(titles[q]) + kCatSuffix[c], PanelKind::line, "reduction_abs", {}, false};
        for (std::size_t w : widths) {
          p.y.push_back("w" + std::to_string(w) + "_" + kCatSuffix[c] + "_" + qty[q]);
        }
        fig.panels.push_back(std::move(p));
      }
    }
    plot(dir / "sweep_aligned.csv", fig, dir / "fig_sweep.svg");

    json report;
    report["widths"] = widths;
    report["grid_max_reduction"] = grid_max;
    report["grid_points"] = grid_points;
    report["monotone_fraction"] = {{"first_order_updating", sweep.monotone_first_order_u},
                                   {"first_order_recent", sweep.monotone_first_order_r},
                                   {"abs_penalty_updating", sweep.monotone_abs_penalty_u},
                                   {"abs_penalty_recent", sweep.monotone_abs_penalty_r}};
    json runs = json::array();
    for (std::size_t i = 0; i < widths.size(); ++i) {
      runs.push_back({{"width", widths[i]},
                      {"initial_train_loss", sweep.runs[i].initial_train_loss},
                      {"final_train_loss", sweep.runs[i].final_train_loss},
                      {"final_test_loss", sweep.runs[i].final_test_loss},
                      {"ordering_after_warmup", to_json(sweep.runs[i].ordering)}});
    }
    report["runs"] = runs;
    auto out = open_out(dir / "sweep_report.json");
    out << report.dump(2) << '\n';
  }
  return sweep;
}

QuadCheckReport quad_check(std::size_t dim, std::size_t trials, double eta, std::uint64_t seed) {
  if (dim < 1 || trials < 1) throw std::invalid_argument("quad_check: dim and trials must be >= 1");
  QuadCheckReport rep;
  rep.dim = dim;
  rep.trials = trials;
  rep.eta = eta;
  const Batch batch{0, {}};
  const AuditOptions exact{AuditMode::exact, 0, 0, 20000};

  {
    const SurfaceModel worked(QuadraticSurface(2, {2, 1, 1, 2}, {0, 0}, 0.0));
    const std::vector<double> w{1.0, 1.0};
    rep.worked_penalty = taylor_probe(worked, w, batch, batch, 0.1).penalty;
    const auto round = joint_penalty(worked, w, batch, 0.1, exact);
    rep.worked_individual_reward = round.individual_reward;
    rep.worked_joint_change = round.joint_change;
    rep.worked_joint_penalty = round.joint_penalty;
  }

  for (std::size_t t = 0; t < trials; ++t) {
    const auto surface = QuadraticSurface::random(dim, derive_seed(seed, 2 * t));
    const SurfaceModel model(surface);
    Rng rng(derive_seed(seed, 2 * t + 1));
    std::vector<double> w(dim);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);

    auto delta = q_grad(surface, w);
    for (double& v : delta) v *= -eta;
    const double expected_penalty = -exact_higher_order(surface, delta);
    const double penalty = taylor_probe(model, w, batch, batch, eta).penalty;
    rep.max_probe_error = std::max(rep.max_probe_error, std::fabs(penalty - expected_penalty) /
                                                            std::max(1.0, std::fabs(expected_penalty)));
    const double expected_joint = exact_cross_penalty(surface, delta);
    const double joint = joint_penalty(model, w, batch, eta, exact).joint_penalty;
    rep.max_joint_error = std::max(rep.max_joint_error, std::fabs(joint - expected_joint) /
                                                          std::max(1.0, std::fabs(expected_joint)));

    std::vector<double> b(dim);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    const SurfaceModel flat(QuadraticSurface::linear(b, rng.uniform(-1.0, 1.0)));
    rep.max_linear_abs_penalty =
        std::max(rep.max_linear_abs_penalty, std::fabs(taylor_probe(flat, w, batch, batch, eta).penalty));
    rep.max_linear_abs_joint =
        std::max(rep.max_linear_abs_joint, std::fabs(joint_penalty(flat, w, batch, eta, exact).joint_penalty));
  }
  rep.passed = rep.max_probe_error <= 1e-10 && rep.max_joint_error <= 1e-10 &&
               rep.max_linear_abs_penalty <= 1e-12 && rep.max_linear_abs_joint <= 1e-12;
  return rep;
}

json to_json(const QuadCheckReport& r) {
  return {{"dim", r.dim},
          {"trials", r.trials},
          {"eta", r.eta},
          {"worked_instance", {{"penalty", r.worked_penalty},
                               {"individual_reward", r.worked_individual_reward},
                               {"joint_change", r.worked_joint_change},
                               {"joint_penalty", r.worked_joint_penalty}}},
          {"max_probe_error", r.max_probe_error},
          {"max_joint_error", r.max_joint_error},
          {"max_linear_abs_penalty", r.max_linear_abs_penalty},
          {"max_linear_abs_joint", r.max_linear_abs_joint},
          {"passed", r.passed}};
}

SeqCompareReport seq_compare(const LossModel& model, std::span<const double> w,
                             const Batch& batch, double eta, const AuditOptions& audit,
                             std::optional<std::uint64_t> order_seed, std::string model_name) {
  SeqCompareReport rep;
  rep.model = std::move(model_name);
  rep.dim = w.size();
  rep.eta = eta;
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (order_seed) {
    Rng rng(*order_seed);
    order = rng.permutation(w.size());
  }
  const auto seq = sequential_round(model, w, batch, eta, order);
  const auto sim = simultaneous_round(model, w, batch, eta);
  rep.loss_start = model.loss(w, batch);
  rep.loss_sequential = model.loss(seq, batch);
  rep.loss_simultaneous = model.loss(sim, batch);
  std::vector<double> diff(w.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = seq[i] - sim[i];
  rep.distance = norm(diff);
  rep.round = joint_penalty(model, w, batch, eta, audit);
  return rep;
}

json to_json(const SeqCompareReport& r) {
  return {{"model", r.model},
          {"dim", r.dim},
          {"eta", r.eta},
          {"loss_start", r.loss_start},
          {"loss_sequential", r.loss_sequential},
          {"loss_simultaneous", r.loss_simultaneous},
          {"distance_seq_vs_sim", r.distance},
          {"round", {{"mode", std::string(to_string(r.round.mode))},
                     {"coords_evaluated", r.round.coords_evaluated},
                     {"individual_reward", r.round.individual_reward},
                     {"joint_change", r.round.joint_change},
                     {"joint_penalty", r.round.joint_penalty},
                     {"scale_factor", r.round.scale_factor},
                     {"sample_variance", r.round.sample_variance}}}};
}

}  // namespace lockstep
