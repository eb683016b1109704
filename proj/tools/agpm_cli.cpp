#include "agpm/harness.hpp"
#include "agpm/io.hpp"
#include "agpm/market_data.hpp"
#include "agpm/models.hpp"
#include "agpm/strategy.hpp"
#include "agpm/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace agpm;

ObservationGrid load_panel(const std::string& panel, const std::string& q0) {
  ObservationGrid grid = load_grid(panel);
  if (!q0.empty()) load_initial_queue(grid, q0);
  return grid;
}

std::vector<std::size_t> select_days(const ObservationGrid& grid, const std::vector<std::string>& labels) {
  std::vector<std::size_t> days;
  if (labels.empty()) {
    for (std::size_t d = 0; d < grid.num_days(); ++d) days.push_back(d);
  } else {
    for (const auto& label : labels) days.push_back(grid.day_index(label));
  }
  return days;
}

ModelConfig model_config(const std::string& kind, const std::string& kernel, const std::string& config_path,
                         std::optional<std::uint64_t> seed, int restarts) {
  ModelConfig config;
  config.kind = parse_model_kind(kind);
  if (!kernel.empty()) config.kernel_spec = kernel;
  if (!config_path.empty()) config.train = train_config_from_json(read_json(config_path));
  if (seed) config.train.seed = *seed;
  if (restarts > 0) config.train.restarts = restarts;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive GP matching models for ride-hailing markets: data synthesis, aggregation, training, "
               "evaluation and relocation strategies."};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Synthesize a market: order CSV, panel CSV and initial queues.");
  std::uint64_t gen_seed = 0;
  std::string gen_spec, gen_orders, gen_panel, gen_q0, gen_truth, gen_grid;
  generate->add_option("--seed", gen_seed, "Random seed")->default_val(0);
  generate->add_option("--spec", gen_spec, "Market spec JSON (default: built-in 4x4x20, 3-day AGPM-5 market)")
      ->check(CLI::ExistingFile);
  generate->add_option("--orders", gen_orders, "Output order CSV");
  generate->add_option("--panel", gen_panel, "Output panel CSV")->required();
  generate->add_option("--q0", gen_q0, "Output initial-queue CSV");
  generate->add_option("--truth", gen_truth, "Output JSON with the generating spec and seed");
  generate->add_option("--grid-config", gen_grid, "Output grid config JSON for 'aggregate'");

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate an order CSV into a panel CSV.");
  std::uint64_t agg_seed = 0;
  std::string agg_orders, agg_config, agg_panel, agg_q0, agg_report;
  aggregate->add_option("--seed", agg_seed, "Random seed (aggregation is deterministic)")->default_val(0);
  aggregate->add_option("--orders", agg_orders, "Input order CSV")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--config", agg_config, "Grid config JSON")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--panel", agg_panel, "Output panel CSV")->required();
  aggregate->add_option("--q0", agg_q0, "Output initial-queue CSV");
  aggregate->add_option("--report", agg_report, "Output JSON with dropped and malformed record counts");

  // train
  auto* train = app.add_subcommand("train", "Fit an AGPM kernel or a baseline on a panel.");
  std::uint64_t train_seed = 0;
  std::string train_panel, train_q0, train_kernel, train_baseline, train_target = "matches", train_config,
                                                                    train_out, train_report;
  std::vector<std::string> train_days;
  int train_restarts = 0;
  train->add_option("--seed", train_seed, "Random seed for restarts")->default_val(0);
  train->add_option("--panel", train_panel, "Input panel CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--q0", train_q0, "Initial-queue CSV (queue baselines)")->check(CLI::ExistingFile);
  auto* kernel_opt = train->add_option("--kernel", train_kernel, "Kernel spec or preset name, e.g. AGPM5");
  auto* baseline_opt =
      train->add_option("--baseline", train_baseline, "Baseline model: pmq, spmq or cdmf")
          ->check(CLI::IsMember({"pmq", "spmq", "cdmf"}));
  kernel_opt->excludes(baseline_opt);
  train->add_option("--target", train_target, "matches or pickups")->check(CLI::IsMember({"matches", "pickups"}));
  train->add_option("--config", train_config, "Training config JSON")->check(CLI::ExistingFile);
  train->add_option("--restarts", train_restarts, "Override the number of optimizer restarts");
  train->add_option("--days", train_days, "Training days (default: all)");
  train->add_option("--out", train_out, "Output model JSON")->required();
  train->add_option("--report", train_report, "Output training report JSON");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict a panel with a fitted model.");
  std::uint64_t pred_seed = 0;
  std::string pred_model, pred_panel, pred_q0, pred_out;
  std::vector<std::string> pred_days;
  bool pred_variance = false;
  predict->add_option("--seed", pred_seed, "Random seed (prediction is deterministic)")->default_val(0);
  predict->add_option("--model", pred_model, "Model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--panel", pred_panel, "Input panel CSV")->required()->check(CLI::ExistingFile);
  predict->add_option("--q0", pred_q0, "Initial-queue CSV (queue baselines)")->check(CLI::ExistingFile);
  predict->add_option("--days", pred_days, "Days to predict (default: all)");
  predict->add_option("--out", pred_out, "Output predictions CSV")->required();
  predict->add_flag("--variance", pred_variance, "Also write the latent predictive variance (AGPM only)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-day-out cross-validation of a model kind.");
  std::uint64_t eval_seed = 0;
  std::string eval_panel, eval_q0, eval_model = "agpm", eval_kernel, eval_target = "matches", eval_config, eval_out,
                                   eval_scatter;
  int eval_restarts = 0;
  evaluate->add_option("--seed", eval_seed, "Random seed for restarts")->default_val(0);
  evaluate->add_option("--panel", eval_panel, "Input panel CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--q0", eval_q0, "Initial-queue CSV (queue baselines)")->check(CLI::ExistingFile);
  evaluate->add_option("--model", eval_model, "agpm, pmq, spmq or cdmf")
      ->check(CLI::IsMember({"agpm", "pmq", "spmq", "cdmf"}));
  evaluate->add_option("--kernel", eval_kernel, "Kernel spec for agpm (default AGPM5)");
  evaluate->add_option("--target", eval_target, "matches or pickups")->check(CLI::IsMember({"matches", "pickups"}));
  evaluate->add_option("--config", eval_config, "Training config JSON")->check(CLI::ExistingFile);
  evaluate->add_option("--restarts", eval_restarts, "Override the number of optimizer restarts");
  evaluate->add_option("--out", eval_out, "Output metrics JSON")->required();
  evaluate->add_option("--scatter", eval_scatter, "Output observed-vs-predicted CSV over all folds");

  // strategize
  auto* strategize = app.add_subcommand("strategize", "Evaluate a relocation strategy on one day.");
  std::uint64_t strat_seed = 0;
  std::string strat_model, strat_panel, strat_q0, strat_day, strat_kind = "GS", strat_config, strat_out, strat_csv;
  std::optional<int> strat_window;
  std::optional<double> strat_fraction, strat_qs, strat_gs, strat_cs;
  strategize->add_option("--seed", strat_seed, "Random seed (strategies are deterministic)")->default_val(0);
  strategize->add_option("--model", strat_model, "AGPM model JSON trained on matches")
      ->required()
      ->check(CLI::ExistingFile);
  strategize->add_option("--panel", strat_panel, "Panel CSV containing the day")->required()->check(CLI::ExistingFile);
  strategize->add_option("--q0", strat_q0, "Initial-queue CSV (default: zero queues)")->check(CLI::ExistingFile);
  strategize->add_option("--day", strat_day, "Day label (default: last day of the panel)");
  strategize->add_option("--strategy", strat_kind, "QS, GS or CS");
  strategize->add_option("--config", strat_config, "Strategy config JSON")->check(CLI::ExistingFile);
  strategize->add_option("--window", strat_window, "Intervals per window (default 10)");
  strategize->add_option("--fraction", strat_fraction, "Fraction of donor supply moved (default 0.1)");
  strategize->add_option("--qs-threshold", strat_qs, "QS window queue threshold (default 100)");
  strategize->add_option("--gs-threshold", strat_gs, "GS window gradient threshold (default 1.2)");
  strategize->add_option("--cs-threshold", strat_cs, "CS queue-times-gradient threshold (default 100)");
  strategize->add_option("--out", strat_out, "Output strategy report JSON")->required();
  strategize->add_option("--metrics-csv", strat_csv, "Output per-zone, per-window metrics CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) {
      const MarketSpec spec = gen_spec.empty() ? default_market_spec() : market_spec_from_json(read_json(gen_spec));
      const auto market = synthesize_market(gen_seed, spec);
      save_grid(market.grid, gen_panel);
      if (!gen_orders.empty()) save_orders(market.records, gen_orders);
      if (!gen_q0.empty()) save_initial_queue(market.grid, gen_q0);
      if (!gen_truth.empty()) write_json(Json{{"seed", gen_seed}, {"spec", to_json(spec)}}, gen_truth);
      if (!gen_grid.empty()) write_json(to_json(spec.grid), gen_grid);
    } else if (*aggregate) {
      const GridConfig config = grid_config_from_json(read_json(agg_config));
      const auto records = load_orders(agg_orders);
      const auto result = aggregate_orders(records, config);
      save_grid(result.grid, agg_panel);
      if (!agg_q0.empty()) save_initial_queue(result.grid, agg_q0);
      if (!agg_report.empty()) {
        auto dropped = [](const DroppedEvents& d) {
          return Json{{"out_of_grid", d.out_of_grid}, {"out_of_horizon", d.out_of_horizon}};
        };
        Json malformed = Json::array();
        for (const auto& m : result.malformed) malformed.push_back({{"index", m.index}, {"reason", m.reason}});
        write_json(Json{{"records", records.size()},
                        {"dropped",
                         {{"demand", dropped(result.dropped_demand)},
                          {"supply", dropped(result.dropped_supply)},
                          {"matches", dropped(result.dropped_matches)},
                          {"pickups", dropped(result.dropped_pickups)}}},
                        {"malformed", malformed}},
                   agg_report);
      }
      if (!result.malformed.empty()) {
        std::cerr << "agpm: warning: " << result.malformed.size() << " malformed record(s) skipped\n";
      }
    } else if (*train) {
      const auto grid = load_panel(train_panel, train_q0);
      const std::string kind = train_baseline.empty() ? "agpm" : train_baseline;
      const auto config = model_config(kind, train_kernel, train_config,
                                       train->count("--seed") ? std::optional(train_seed) : std::nullopt,
                                       train_restarts);
      const auto days = select_days(grid, train_days);
      const auto model = fit_model(grid, days, config, parse_target(train_target));
      write_json(to_json(model), train_out);
      if (!train_report.empty()) {
        Json report = {{"model_kind", kind},
                       {"target", train_target},
                       {"days", Json::array()},
                       {"train_config", to_json(config.train)}};
        for (std::size_t d : days) report["days"].push_back(grid.days()[d]);
        if (model.report) report["training"] = to_json(*model.report);
        if (model.gp) report["kernel_spec"] = model.gp->expr().to_string();
        write_json(report, train_report);
      }
    } else if (*predict) {
      const auto grid = load_panel(pred_panel, pred_q0);
      const auto model = fitted_model_from_json(read_json(pred_model));
      const auto days = select_days(grid, pred_days);
      if (pred_variance) {
        if (!model.gp) throw std::invalid_argument("--variance is only available for agpm models");
        const auto dist = model.gp->predict(grid.inputs(days));
        save_predictions(grid, days, dist.mean, &dist.variance, pred_out);
      } else {
        save_predictions(grid, days, model.predict(grid, days), nullptr, pred_out);
      }
    } else if (*evaluate) {
      const auto grid = load_panel(eval_panel, eval_q0);
      const auto config = model_config(eval_model, eval_kernel, eval_config,
                                       evaluate->count("--seed") ? std::optional(eval_seed) : std::nullopt,
                                       eval_restarts);
      const auto target = parse_target(eval_target);
      check_model_target(config.kind, target);
      const auto cv = cross_validate(grid, config, target);
      Json out = to_json(cv);
      if (config.kind == ModelKind::Agpm) out["kernel_spec"] = parse_kernel_spec(config.kernel_spec).to_string();
      write_json(out, eval_out);
      if (!eval_scatter.empty()) {
        Eigen::Index total = 0;
        for (const auto& f : cv.folds) total += f.observed.size();
        Eigen::VectorXd observed(total);
        Eigen::VectorXd predicted(total);
        Eigen::Index offset = 0;
        for (const auto& f : cv.folds) {
          observed.segment(offset, f.observed.size()) = f.observed;
          predicted.segment(offset, f.predicted.size()) = f.predicted;
          offset += f.observed.size();
        }
        emit_scatter(observed, predicted, eval_scatter);
      }
    } else if (*strategize) {
      const auto grid = load_panel(strat_panel, strat_q0);
      const auto model = fitted_model_from_json(read_json(strat_model));
      if (!model.gp) throw std::invalid_argument("strategies need an agpm model");
      if (model.target != Target::Matches) throw std::invalid_argument("strategies need a model of matches");
      StrategyConfig config = strat_config.empty() ? StrategyConfig{} : strategy_config_from_json(read_json(strat_config));
      if (strat_window) config.window_intervals = *strat_window;
      if (strat_fraction) config.fraction = *strat_fraction;
      if (strat_qs) config.qs_threshold = *strat_qs;
      if (strat_gs) config.gs_threshold = *strat_gs;
      if (strat_cs) config.cs_threshold = *strat_cs;
      const std::size_t day = strat_day.empty() ? grid.num_days() - 1 : grid.day_index(strat_day);
      const auto& shape = grid.shape();
      const auto ev = evaluate_strategy(*model.gp, shape, grid.field(day, Field::Demand), grid.field(day, Field::Supply),
                                        grid.initial_queue(day), parse_strategy(strat_kind), config,
                                        grid_adjacency(shape.rows, shape.cols));
      Json report = strategy_report(ev);
      report["day"] = grid.days()[day];
      write_json(report, strat_out);
      if (!strat_csv.empty()) save_strategy_metrics(ev, strat_csv);
    }
  } catch (const std::exception& e) {
    std::cerr << "agpm: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
