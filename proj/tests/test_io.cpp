#include "agpm/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace agpm;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("agpm_io_" + std::to_string(std::random_device{}()) + "_" + name);
}

ObservationGrid tiny_market(std::uint64_t seed) {
  auto spec = default_market_spec();
  spec.grid.rows = 3;
  spec.grid.cols = 3;
  spec.grid.horizon_end_s = spec.grid.horizon_start_s + 6 * spec.grid.interval_s;
  return synthesize_market(seed, spec).grid;
}

}  // namespace

TEST_CASE("grid config JSON") {
  GridConfig c;
  c.rows = 3;
  c.days = {"2024-01-02"};
  c.horizon_start_s = 8 * 3600;
  const Json j = to_json(c);
  CHECK(j.at("horizon_start") == "08:00:00");
  const auto back = grid_config_from_json(j);
  CHECK(back.rows == 3);
  CHECK(back.horizon_start_s == c.horizon_start_s);
  CHECK(back.days == c.days);

  const auto partial = grid_config_from_json(Json::parse(R"({"rows": 2, "days": ["2024-01-01"]})"));
  CHECK(partial.rows == 2);
  CHECK(partial.cols == 6);
  CHECK(partial.interval_s == 180);
  CHECK_THROWS_AS(grid_config_from_json(Json::parse(R"({"rowz": 2})")), std::invalid_argument);
}

TEST_CASE("market spec JSON") {
  const auto spec = default_market_spec();
  const auto back = market_spec_from_json(to_json(spec));
  CHECK(back.grid.days == spec.grid.days);
  CHECK(back.theta_matches == spec.theta_matches);
  CHECK(back.demand.random_bumps == spec.demand.random_bumps);
  CHECK(back.noise_variance == spec.noise_variance);
  CHECK(synthesize_market(4, back).grid == synthesize_market(4, spec).grid);

  const auto named = market_spec_from_json(Json::parse(R"({"generator": "cdmf", "theta_matches": "pickup"})"));
  CHECK(named.generator == GeneratorKind::Cdmf);
  CHECK(named.theta_matches == preset_theta("pickup"));
  CHECK_THROWS(market_spec_from_json(Json::parse(R"({"generator": "arima"})")));
}

TEST_CASE("train config JSON") {
  TrainConfig c;
  c.restarts = 2;
  c.seed = 77;
  c.init = InitMode::Preset;
  c.preset = {1, 2, 3};
  c.bounds = {{0.1, 10}, {0.2, 20}, {0.3, 30}};
  const auto back = train_config_from_json(to_json(c));
  CHECK(back.restarts == 2);
  CHECK(back.seed == 77);
  CHECK(back.init == InitMode::Preset);
  CHECK(back.preset == c.preset);
  CHECK(back.bounds[2].high == 30);

  const auto named = train_config_from_json(Json::parse(R"({"init": "preset", "preset": "matching"})"));
  CHECK(named.preset.size() == 9);
  CHECK(named.preset[0] == 5.4);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"init": "sobol"})")), std::invalid_argument);
}

TEST_CASE("strategy config JSON") {
  StrategyConfig c;
  c.window_intervals = 5;
  c.gs_threshold = 2.0;
  c.no_donate_high = 1.5;
  const Json j = to_json(c);
  CHECK(j.at("gs_no_donate_band") == Json::array({1.0, 1.5}));
  const auto back = strategy_config_from_json(j);
  CHECK(back.window_intervals == 5);
  CHECK(back.no_donate_high == 1.5);
  CHECK_THROWS_AS(strategy_config_from_json(Json::parse(R"({"fraction": 1.5})")), std::invalid_argument);
}

TEST_CASE("fitted model envelope") {
  const auto grid = tiny_market(6);
  const std::vector<std::size_t> train{0, 1};
  const std::vector<std::size_t> test{2};

  SUBCASE("agpm") {
    ModelConfig config;
    config.train.restarts = 1;
    config.train.max_iters = 20;
    const auto model = fit_model(grid, train, config, Target::Matches);
    const auto path = temp_file("model.json");
    write_json(to_json(model), path);
    const auto loaded = fitted_model_from_json(read_json(path));
    fs::remove(path);
    REQUIRE(loaded.gp.has_value());
    CHECK(loaded.gp->theta() == model.gp->theta());
    CHECK(loaded.gp->jitter_used() == model.gp->jitter_used());
    CHECK(loaded.predict(grid, test) == model.predict(grid, test));
    CHECK(parse_kernel_spec(to_json(model).at("kernel_spec").get<std::string>()) == model.gp->expr());
  }
  SUBCASE("baselines") {
    for (auto kind : {ModelKind::Pmq, ModelKind::Spmq, ModelKind::Cdmf}) {
      ModelConfig config;
      config.kind = kind;
      const auto model = fit_model(grid, train, config, Target::Matches);
      const Json j = to_json(model);
      CHECK(j.at("model_kind") == std::string(model_kind_name(kind)));
      const auto loaded = fitted_model_from_json(j);
      CHECK(loaded.cdmf == model.cdmf);
      CHECK(loaded.spmq == model.spmq);
      CHECK(loaded.predict(grid, test) == model.predict(grid, test));
    }
  }
  SUBCASE("rejections") {
    CHECK_THROWS(fitted_model_from_json(Json::parse(R"({"model_kind": "pmq", "target": "pickups"})")));
    CHECK_THROWS(fitted_model_from_json(Json::parse(R"({"model_kind": "pmq", "target": "matches", "extra": 1})")));
  }
}

TEST_CASE("cross-validation report JSON") {
  const auto grid = tiny_market(8);
  ModelConfig config;
  config.kind = ModelKind::Cdmf;
  const auto cv = cross_validate(grid, config, Target::Matches);
  const Json j = to_json(cv);
  CHECK(j.at("per_fold").size() == 3);
  CHECK(j.at("averaged").contains("r2"));
  CHECK(j.at("pooled").contains("rmse"));
  CHECK(j.at("per_fold")[0].contains("cdmf"));
  CHECK(j.at("averaged").at("r2").get<double>() == cv.averaged.r2);
}

TEST_CASE("JSON files are written deterministically") {
  const Json j = {{"x", 0.1}, {"y", {1, 2}}};
  const auto a = temp_file("a.json");
  write_json(j, a);
  std::ifstream in(a);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == "{\n  \"x\": 0.1,\n  \"y\": [\n    1,\n    2\n  ]\n}\n");
  CHECK(read_json(a) == j);
  fs::remove(a);
  CHECK_THROWS(read_json(a));
}
