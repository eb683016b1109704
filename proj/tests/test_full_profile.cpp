#include "agpm/harness.hpp"
#include "agpm/synthetic.hpp"
#include "agpm/training.hpp"

#include <doctest.h>

using namespace agpm;

TEST_CASE("full-size synthetic profile") {
  auto spec = default_market_spec();
  spec.grid.rows = 6;
  spec.grid.cols = 6;
  spec.grid.horizon_end_s = spec.grid.horizon_start_s + 40 * spec.grid.interval_s;
  spec.grid.days = {"2024-03-04", "2024-03-05", "2024-03-06", "2024-03-07", "2024-03-08"};
  spec.noise_variance = 0.1;
  const auto grid = synthesize_market(1, spec).grid;
  REQUIRE(grid.inputs(std::vector<std::size_t>{0}).rows() == 6 * 6 * 40);

  ModelConfig agpm;
  agpm.train.init = InitMode::Preset;
  const Eigen::VectorXd preset = preset_theta("matching");
  agpm.train.preset.assign(preset.data(), preset.data() + preset.size());
  agpm.train.restarts = 1;
  ModelConfig cdmf;
  cdmf.kind = ModelKind::Cdmf;

  const auto gp = cross_validate(grid, agpm, Target::Matches);
  const auto cd = cross_validate(grid, cdmf, Target::Matches);
  MESSAGE("AGPM-5 averaged R2 ", gp.averaged.r2, ", CDMF averaged R2 ", cd.averaged.r2);
  CHECK(gp.averaged.r2 > 0.8);
  CHECK(gp.averaged.r2 > cd.averaged.r2);
}
