#include "agpm/io.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace agpm {

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) throw std::invalid_argument("unknown key '" + item.key() + "' in " + std::string(what));
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json vec(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd to_vector(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::VectorXd theta_from_json(const Json& j) {
  if (j.is_string()) return preset_theta(j.get<std::string>());
  return to_vector(j);
}

Json zone_json(const GridShape& shape, std::size_t z) {
  const Zone zone = shape.zone_at(z);
  return Json{{"r", zone.row}, {"c", zone.col}};
}

Json surface_json(const IntensitySurface& s) {
  Json bumps = Json::array();
  for (const auto& b : s.bumps) {
    bumps.push_back({{"amplitude", b.amplitude},
                     {"row", b.row},
                     {"col", b.col},
                     {"interval", b.interval},
                     {"width_rc", b.width_rc},
                     {"width_t", b.width_t}});
  }
  return {{"base", s.base},
          {"bumps", bumps},
          {"random_bumps", s.random_bumps},
          {"random_amplitude", s.random_amplitude},
          {"random_width_rc", s.random_width_rc},
          {"random_width_t", s.random_width_t},
          {"day_sigma", s.day_sigma}};
}

IntensitySurface surface_from_json(const Json& j) {
  check_keys(j, {"base", "bumps", "random_bumps", "random_amplitude", "random_width_rc", "random_width_t", "day_sigma"},
             "intensity surface");
  IntensitySurface s;
  read_opt(j, "base", s.base);
  read_opt(j, "random_bumps", s.random_bumps);
  read_opt(j, "random_amplitude", s.random_amplitude);
  read_opt(j, "random_width_rc", s.random_width_rc);
  read_opt(j, "random_width_t", s.random_width_t);
  read_opt(j, "day_sigma", s.day_sigma);
  if (j.contains("bumps")) {
    for (const auto& jb : j.at("bumps")) {
      check_keys(jb, {"amplitude", "row", "col", "interval", "width_rc", "width_t"}, "bump");
      Bump b;
      read_opt(jb, "amplitude", b.amplitude);
      read_opt(jb, "row", b.row);
      read_opt(jb, "col", b.col);
      read_opt(jb, "interval", b.interval);
      read_opt(jb, "width_rc", b.width_rc);
      read_opt(jb, "width_t", b.width_t);
      s.bumps.push_back(b);
    }
  }
  return s;
}

Json cdmf_json(const CdmfParams& p) { return {{"A", p.A}, {"alpha", p.alpha}, {"beta", p.beta}}; }

CdmfParams cdmf_from_json(const Json& j) {
  check_keys(j, {"A", "alpha", "beta"}, "cdmf parameters");
  CdmfParams p;
  read_opt(j, "A", p.A);
  read_opt(j, "alpha", p.alpha);
  read_opt(j, "beta", p.beta);
  return p;
}

Json spmq_json(const SpmqParams& p) { return {{"a", p.a}, {"b", p.b}}; }

SpmqParams spmq_from_json(const Json& j) {
  check_keys(j, {"a", "b"}, "spmq parameters");
  SpmqParams p;
  read_opt(j, "a", p.a);
  read_opt(j, "b", p.b);
  return p;
}

}  // namespace

Json to_json(const GridConfig& c) {
  return {{"rows", c.rows},
          {"cols", c.cols},
          {"origin_lat", c.origin_lat},
          {"origin_lon", c.origin_lon},
          {"hex_radius_m", c.hex_radius_m},
          {"interval_s", c.interval_s},
          {"horizon_start", format_time_of_day(c.horizon_start_s)},
          {"horizon_end", format_time_of_day(c.horizon_end_s)},
          {"days", c.days},
          {"adjacency_convention", c.adjacency_convention}};
}

GridConfig grid_config_from_json(const Json& j) {
  check_keys(j,
             {"rows", "cols", "origin_lat", "origin_lon", "hex_radius_m", "interval_s", "horizon_start", "horizon_end",
              "days", "adjacency_convention"},
             "grid config");
  GridConfig c;
  read_opt(j, "rows", c.rows);
  read_opt(j, "cols", c.cols);
  read_opt(j, "origin_lat", c.origin_lat);
  read_opt(j, "origin_lon", c.origin_lon);
  read_opt(j, "hex_radius_m", c.hex_radius_m);
  read_opt(j, "interval_s", c.interval_s);
  if (j.contains("horizon_start")) c.horizon_start_s = parse_time_of_day(j.at("horizon_start").get<std::string>());
  if (j.contains("horizon_end")) c.horizon_end_s = parse_time_of_day(j.at("horizon_end").get<std::string>());
  read_opt(j, "days", c.days);
  read_opt(j, "adjacency_convention", c.adjacency_convention);
  c.validate();
  return c;
}

Json to_json(const MarketSpec& s) {
  return {{"generator", std::string(generator_name(s.generator))},
          {"grid", to_json(s.grid)},
          {"demand", surface_json(s.demand)},
          {"supply", surface_json(s.supply)},
          {"kernel_spec", s.kernel_spec},
          {"theta_matches", vec(s.theta_matches)},
          {"theta_pickups", vec(s.theta_pickups)},
          {"mean_matches", s.mean_matches},
          {"mean_pickups", s.mean_pickups},
          {"cdmf_matches", cdmf_json(s.cdmf_matches)},
          {"cdmf_pickups", cdmf_json(s.cdmf_pickups)},
          {"spmq", spmq_json(s.spmq)},
          {"noise_variance", s.noise_variance},
          {"initial_queue_mean", s.initial_queue_mean},
          {"round_outputs", s.round_outputs}};
}

MarketSpec market_spec_from_json(const Json& j) {
  check_keys(j,
             {"generator", "grid", "demand", "supply", "kernel_spec", "theta_matches", "theta_pickups", "mean_matches",
              "mean_pickups", "cdmf_matches", "cdmf_pickups", "spmq", "noise_variance", "initial_queue_mean",
              "round_outputs"},
             "market spec");
  MarketSpec s = default_market_spec();
  if (j.contains("generator")) s.generator = parse_generator(j.at("generator").get<std::string>());
  if (j.contains("grid")) s.grid = grid_config_from_json(j.at("grid"));
  if (j.contains("demand")) s.demand = surface_from_json(j.at("demand"));
  if (j.contains("supply")) s.supply = surface_from_json(j.at("supply"));
  read_opt(j, "kernel_spec", s.kernel_spec);
  if (j.contains("theta_matches")) s.theta_matches = theta_from_json(j.at("theta_matches"));
  if (j.contains("theta_pickups")) s.theta_pickups = theta_from_json(j.at("theta_pickups"));
  read_opt(j, "mean_matches", s.mean_matches);
  read_opt(j, "mean_pickups", s.mean_pickups);
  if (j.contains("cdmf_matches")) s.cdmf_matches = cdmf_from_json(j.at("cdmf_matches"));
  if (j.contains("cdmf_pickups")) s.cdmf_pickups = cdmf_from_json(j.at("cdmf_pickups"));
  if (j.contains("spmq")) s.spmq = spmq_from_json(j.at("spmq"));
  read_opt(j, "noise_variance", s.noise_variance);
  read_opt(j, "initial_queue_mean", s.initial_queue_mean);
  read_opt(j, "round_outputs", s.round_outputs);
  s.validate();
  return s;
}

Json to_json(const TrainConfig& c) {
  Json bounds = Json::array();
  for (const auto& b : c.bounds) bounds.push_back({b.low, b.high});
  return {{"restarts", c.restarts},
          {"max_iters", c.max_iters},
          {"grad_tol", c.grad_tol},
          {"rel_f_tol", c.rel_f_tol},
          {"seed", c.seed},
          {"init", c.init == InitMode::Preset ? "preset" : "random"},
          {"preset", c.preset},
          {"frozen", c.frozen},
          {"bounds", bounds}};
}

TrainConfig train_config_from_json(const Json& j) {
  check_keys(j, {"restarts", "max_iters", "grad_tol", "rel_f_tol", "seed", "init", "preset", "frozen", "bounds"},
             "train config");
  TrainConfig c;
  read_opt(j, "restarts", c.restarts);
  read_opt(j, "max_iters", c.max_iters);
  read_opt(j, "grad_tol", c.grad_tol);
  read_opt(j, "rel_f_tol", c.rel_f_tol);
  read_opt(j, "seed", c.seed);
  if (j.contains("init")) {
    const auto mode = j.at("init").get<std::string>();
    if (mode == "preset") {
      c.init = InitMode::Preset;
    } else if (mode == "random") {
      c.init = InitMode::LogUniformRandom;
    } else {
      throw std::invalid_argument("init must be 'random' or 'preset', got '" + mode + "'");
    }
  }
  if (j.contains("preset")) {
    const Eigen::VectorXd p = theta_from_json(j.at("preset"));
    c.preset.assign(p.data(), p.data() + p.size());
  }
  read_opt(j, "frozen", c.frozen);
  if (j.contains("bounds")) {
    for (const auto& b : j.at("bounds")) {
      const auto pair = b.get<std::vector<double>>();
      if (pair.size() != 2) throw std::invalid_argument("each bound must be a [low, high] pair");
      c.bounds.push_back({pair[0], pair[1]});
    }
  }
  return c;
}

Json to_json(const StrategyConfig& c) {
  return {{"window_intervals", c.window_intervals},
          {"fraction", c.fraction},
          {"qs_threshold", c.qs_threshold},
          {"gs_threshold", c.gs_threshold},
          {"gs_no_donate_band", {c.no_donate_low, c.no_donate_high}},
          {"cs_threshold", c.cs_threshold},
          {"clamp_queue", c.clamp_queue}};
}

StrategyConfig strategy_config_from_json(const Json& j) {
  check_keys(j,
             {"window_intervals", "fraction", "qs_threshold", "gs_threshold", "gs_no_donate_band", "cs_threshold",
              "clamp_queue"},
             "strategy config");
  StrategyConfig c;
  read_opt(j, "window_intervals", c.window_intervals);
  read_opt(j, "fraction", c.fraction);
  read_opt(j, "qs_threshold", c.qs_threshold);
  read_opt(j, "gs_threshold", c.gs_threshold);
  read_opt(j, "cs_threshold", c.cs_threshold);
  read_opt(j, "clamp_queue", c.clamp_queue);
  if (j.contains("gs_no_donate_band")) {
    const auto band = j.at("gs_no_donate_band").get<std::vector<double>>();
    if (band.size() != 2) throw std::invalid_argument("gs_no_donate_band must be [low, high]");
    c.no_donate_low = band[0];
    c.no_donate_high = band[1];
  }
  c.validate();
  return c;
}

Json to_json(const TrainReport& report) {
  Json restarts = Json::array();
  for (const auto& r : report.per_restart) {
    Json jr = {{"initial_theta", vec(r.initial_theta)},
               {"final_theta", vec(r.final_theta)},
               {"iterations", r.iterations},
               {"converged", r.converged},
               {"lml_trace", r.lml_trace}};
    if (std::isfinite(r.final_lml)) {
      jr["final_lml"] = r.final_lml;
    } else {
      jr["final_lml"] = nullptr;
    }
    if (!r.failure.empty()) jr["failure"] = r.failure;
    restarts.push_back(std::move(jr));
  }
  return {{"best_theta", vec(report.best_theta)}, {"best_lml", report.best_lml}, {"per_restart", restarts}};
}

Json to_json(const Metrics& m) { return {{"mae", m.mae}, {"rmse", m.rmse}, {"r2", m.r2}, {"n", m.n}}; }

Json to_json(const CrossValidationResult& cv) {
  Json folds = Json::array();
  for (const auto& f : cv.folds) {
    Json jf = {{"held_out_day", f.fold.held_out_day}, {"training_days", f.fold.training_days}};
    const Json metrics = to_json(f.metrics);
    for (const auto& item : metrics.items()) jf[item.key()] = item.value();
    if (f.model.kind == ModelKind::Agpm && f.model.gp) jf["theta"] = vec(f.model.gp->theta());
    if (f.model.kind == ModelKind::Cdmf) jf["cdmf"] = cdmf_json(f.model.cdmf);
    if (f.model.kind == ModelKind::Spmq) jf["spmq"] = spmq_json(f.model.spmq);
    folds.push_back(std::move(jf));
  }
  Json j = {{"model_kind", std::string(model_kind_name(cv.kind))},
            {"target", std::string(target_name(cv.target))},
            {"per_fold", folds},
            {"averaged", to_json(cv.averaged)},
            {"pooled", to_json(cv.pooled)}};
  // Fold hyperparameters averaged in raw units.
  if (cv.kind == ModelKind::Agpm && !cv.folds.empty() && cv.folds.front().model.gp) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(cv.folds.front().model.gp->theta().size());
    for (const auto& f : cv.folds) mean += f.model.gp->theta();
    j["averaged_theta"] = vec(mean / static_cast<double>(cv.folds.size()));
  }
  return j;
}

Json to_json(const FittedModel& model) {
  Json j = {{"model_kind", std::string(model_kind_name(model.kind))},
            {"target", std::string(target_name(model.target))}};
  switch (model.kind) {
    case ModelKind::Agpm: {
      if (!model.gp) throw std::logic_error("agpm model has no fitted GP");
      const auto& gp = *model.gp;
      Json X = Json::array();
      for (Eigen::Index i = 0; i < gp.inputs().rows(); ++i) {
        X.push_back(std::vector<double>(gp.inputs().row(i).data(), gp.inputs().row(i).data() + gp.inputs().cols()));
      }
      j["kernel_spec"] = gp.expr().to_string();
      j["theta"] = vec(gp.theta());
      j["jitter_used"] = gp.jitter_used();
      j["X"] = std::move(X);
      j["Y"] = vec(gp.targets());
      break;
    }
    case ModelKind::Cdmf: j["cdmf"] = cdmf_json(model.cdmf); break;
    case ModelKind::Spmq: j["spmq"] = spmq_json(model.spmq); break;
    case ModelKind::Pmq: break;
  }
  return j;
}

FittedModel fitted_model_from_json(const Json& j) {
  check_keys(j, {"model_kind", "target", "kernel_spec", "theta", "jitter_used", "X", "Y", "cdmf", "spmq"}, "model");
  FittedModel model;
  model.kind = parse_model_kind(j.at("model_kind").get<std::string>());
  model.target = parse_target(j.at("target").get<std::string>());
  check_model_target(model.kind, model.target);
  switch (model.kind) {
    case ModelKind::Agpm: {
      const auto expr = parse_kernel_spec(j.at("kernel_spec").get<std::string>());
      const auto rows = j.at("X").get<std::vector<std::vector<double>>>();
      Inputs X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kNumCovariates));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != kNumCovariates) throw std::invalid_argument("model X rows must have 5 covariates");
        for (std::size_t k = 0; k < kNumCovariates; ++k) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
      model.gp = TrainedModel::fit_with_jitter(expr, to_vector(j.at("theta")), std::move(X), to_vector(j.at("Y")),
                                               j.at("jitter_used").get<double>());
      if (!(model.gp->reconstruction_error() < 1e-8) || !(model.gp->alpha_residual() < 1e-6)) {
        throw std::runtime_error("stored model fails its factorization checks after reloading");
      }
      break;
    }
    case ModelKind::Cdmf: model.cdmf = cdmf_from_json(j.at("cdmf")); break;
    case ModelKind::Spmq: model.spmq = spmq_from_json(j.at("spmq")); break;
    case ModelKind::Pmq: break;
  }
  return model;
}

Json strategy_report(const StrategyEvaluation& ev) {
  const auto& shape = ev.shape;
  Json targets = Json::array();
  for (const auto& window : ev.plan.targets) {
    Json list = Json::array();
    for (std::size_t z : window) list.push_back(zone_json(shape, z));
    targets.push_back(std::move(list));
  }
  Json transfers = Json::array();
  for (const auto& t : ev.plan.transfers) {
    transfers.push_back({{"window", t.window},
                         {"donor", zone_json(shape, t.donor)},
                         {"target", zone_json(shape, t.target)},
                         {"amounts", t.amounts}});
  }
  Json per_zone = Json::array();
  for (int z = 0; z < shape.zones(); ++z) {
    const Zone zone = shape.zone_at(static_cast<std::size_t>(z));
    per_zone.push_back({{"r", zone.row},
                        {"c", zone.col},
                        {"Q_before", ev.before.Q_zone[z]},
                        {"Q_after", ev.after.Q_zone[z]}});
  }
  return {{"kind", std::string(strategy_name(ev.kind))},
          {"config", to_json(ev.config)},
          {"targets_per_window", targets},
          {"transfers", transfers},
          {"Q_before", ev.before.Q_total},
          {"Q_after", ev.after.Q_total},
          {"per_zone", per_zone}};
}

void save_strategy_metrics(const StrategyEvaluation& ev, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "r,c,window,Q_before,Q_after,gradient,target\n";
  const auto& shape = ev.shape;
  for (Eigen::Index w = 0; w < ev.before.per_window_Q.cols(); ++w) {
    std::set<std::size_t> targets(ev.plan.targets[static_cast<std::size_t>(w)].begin(),
                                  ev.plan.targets[static_cast<std::size_t>(w)].end());
    for (int z = 0; z < shape.zones(); ++z) {
      const Zone zone = shape.zone_at(static_cast<std::size_t>(z));
      const double g = ev.gradient.size() > 0 ? ev.gradient(z, w) : 0.0;
      out << zone.row << ',' << zone.col << ',' << (w + 1) << ',' << format_real(ev.before.per_window_Q(z, w)) << ','
          << format_real(ev.after.per_window_Q(z, w)) << ',' << format_real(g) << ','
          << (targets.count(static_cast<std::size_t>(z)) ? 1 : 0) << '\n';
    }
  }
}

void save_predictions(const ObservationGrid& grid, std::span<const std::size_t> days, const Eigen::VectorXd& mean,
                      const Eigen::VectorXd* variance, const std::filesystem::path& path) {
  const auto& s = grid.shape();
  const Eigen::Index expected = static_cast<Eigen::Index>(days.size()) * s.zones() * s.intervals;
  if (mean.size() != expected || (variance && variance->size() != expected)) {
    throw std::invalid_argument("prediction vector does not match the panel");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "day,r,c,t,predicted" << (variance ? ",variance" : "") << '\n';
  Eigen::Index i = 0;
  for (std::size_t d : days)
    for (int r = 1; r <= s.rows; ++r)
      for (int c = 1; c <= s.cols; ++c)
        for (int t = 1; t <= s.intervals; ++t, ++i) {
          out << grid.days()[d] << ',' << r << ',' << c << ',' << t << ',' << format_real(mean[i]);
          if (variance) out << ',' << format_real((*variance)[i]);
          out << '\n';
        }
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace agpm
