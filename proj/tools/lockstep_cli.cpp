// Command-line front end: train, sweep, quad-check, seq-compare, plot.
//
// Every subcommand prints one JSON summary on stdout. Failures print a single
// JSON line {"error": kind, "message": ...} on stderr and exit nonzero
// (2 = bad config or arguments, 3 = numeric failure, 1 = anything else).

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lockstep/config.hpp"
#include "lockstep/csv.hpp"
#include "lockstep/error.hpp"
#include "lockstep/plot.hpp"
#include "lockstep/runner.hpp"
#include "lockstep/surfaces.hpp"

namespace {

using nlohmann::json;
using namespace lockstep;

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (!g.out.empty()) c.out_dir = g.out;
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

json run_summary(const RunResult& r) {
  return {{"aborted", r.aborted},
          {"error", r.error},
          {"last_good_step", r.last_good_step},
          {"updates", r.updates},
          {"initial_train_loss", r.initial_train_loss},
          {"final_train_loss", r.final_train_loss},
          {"final_test_loss", r.final_test_loss},
          {"probe_records", r.records.size()},
          {"ordering_after_warmup", to_json(r.ordering)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGD training with per-step Taylor-decomposition probes"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory (overrides out_dir)");
  app.add_option("--seed", g.seed, "run seed (overrides the config)");

  auto* train_cmd = app.add_subcommand("train", "train one model with probes");

  auto* sweep_cmd = app.add_subcommand("sweep", "one run per hidden width, aligned on loss reduction");
  std::vector<std::size_t> widths{64, 256, 1024};
  std::size_t grid_points = 101;
  double grid_fraction = 0.8;
  sweep_cmd->add_option("--widths", widths, "hidden widths")->delimiter(',');
  sweep_cmd->add_option("--grid-points", grid_points, "alignment grid size");
  sweep_cmd->add_option("--grid-fraction", grid_fraction,
                        "share of the smallest model's loss-reduction range to align on");

  auto* quad_cmd = app.add_subcommand("quad-check", "check probe and joint penalty against quadratic closed forms");
  std::size_t q_dim = 20, q_trials = 100;
  double q_eta = 0.1;
  quad_cmd->add_option("--dim", q_dim);
  quad_cmd->add_option("--trials", q_trials);
  quad_cmd->add_option("--eta", q_eta);

  auto* seq_cmd = app.add_subcommand("seq-compare", "sequential vs simultaneous round from one start point");
  std::size_t s_dim = 0;
  std::optional<double> s_eta;
  std::optional<std::uint64_t> s_order_seed;
  std::string s_mode = "exact";
  std::size_t s_sample = 256;
  seq_cmd->add_option("--dim", s_dim, "use a random quadratic of this dimension instead of the MLP");
  seq_cmd->add_option("--eta", s_eta);
  seq_cmd->add_option("--order-seed", s_order_seed, "random coordinate order (default natural)");
  seq_cmd->add_option("--mode", s_mode, "exact or sampled individual reward");
  seq_cmd->add_option("--sample-size", s_sample);

  auto* plot_cmd = app.add_subcommand("plot", "render CSV columns to SVG");
  std::string p_csv, p_svg, p_x, p_kind = "scatter", p_title;
  std::vector<std::string> p_y;
  bool p_diag = false;
  plot_cmd->add_option("--csv", p_csv)->required();
  plot_cmd->add_option("--svg", p_svg)->required();
  plot_cmd->add_option("--x", p_x)->required();
  plot_cmd->add_option("--y", p_y)->required()->delimiter(',');
  plot_cmd->add_option("--kind", p_kind, "scatter or line");
  plot_cmd->add_option("--title", p_title);
  plot_cmd->add_flag("--y-equals-x", p_diag, "draw the y = x reference line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*train_cmd) {
      const auto result = train(resolve(g));
      std::cout << run_summary(result).dump(2) << std::endl;
      if (result.aborted) return fail("numeric", result.error, 3);
    } else if (*sweep_cmd) {
      const auto sweep = width_sweep(resolve(g), widths, true, grid_points, grid_fraction);
      json runs = json::array();
      for (const auto& r : sweep.runs) runs.push_back(run_summary(r));
      std::cout << json{{"widths", sweep.widths},
                        {"monotone_fraction", {{"first_order_updating", sweep.monotone_first_order_u},
                                               {"first_order_recent", sweep.monotone_first_order_r},
                                               {"abs_penalty_updating", sweep.monotone_abs_penalty_u},
                                               {"abs_penalty_recent", sweep.monotone_abs_penalty_r}}},
                        {"runs", runs}}
                       .dump(2)
                << std::endl;
    } else if (*quad_cmd) {
      const auto rep = quad_check(q_dim, q_trials, q_eta, g.seed.value_or(0));
      std::cout << to_json(rep).dump(2) << std::endl;
      if (!rep.passed) return fail("check", "quadratic identities exceeded tolerance", 1);
    } else if (*seq_cmd) {
      AuditOptions audit{parse_audit_mode(s_mode), s_sample, g.seed.value_or(0), 20000};
      if (s_dim > 0) {
        const SurfaceModel model(QuadraticSurface::random(s_dim, g.seed.value_or(0)));
        std::vector<double> w(s_dim, 1.0);
        const auto rep = seq_compare(model, w, Batch{0, {}}, s_eta.value_or(0.1), audit,
                                     s_order_seed, "quadratic");
        std::cout << to_json(rep).dump(2) << std::endl;
      } else {
        const RunConfig config = resolve(g);
        if (config.audit) audit.d_max = config.audit->d_max;
        const auto data = prepare_data(config);
        const MlpModel model(spec_for(config, data.train), data.train);
        const auto w = init_params(model.spec(), config.seed);
        const auto rep = seq_compare(model, w.values(), data.batches.front(),
                                     s_eta.value_or(config.eta), audit, s_order_seed, "mlp");
        std::cout << to_json(rep).dump(2) << std::endl;
      }
    } else if (*plot_cmd) {
      PanelKind kind;
      if (p_kind == "scatter") {
        kind = PanelKind::scatter;
      } else if (p_kind == "line") {
        kind = PanelKind::line;
      } else {
        return fail("usage", "--kind must be scatter or line", 2);
      }
      Figure fig{p_title, 1, {{p_title, kind, p_x, p_y, p_diag}}};
      plot(p_csv, fig, p_svg);
      std::cout << json{{"svg", p_svg}}.dump() << std::endl;
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const ParseError& e) {
    return fail("parse", e.what(), 2);
  } catch (const BudgetExceeded& e) {
    return fail("budget", e.what(), 2);
  } catch (const NumericFailure& e) {
    return fail("numeric", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("error", e.what(), 1);
  }
  return 0;
}
