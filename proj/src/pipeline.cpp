#include "subsight/pipeline.hpp"

namespace subsight::pipeline {

inversion_outputs invert(const sbas::interferogram_stack& stack, const run_config& config, int threads) {
  sbas::inversion_options opt;
  opt.estimate_dem = config.estimate_dem;
  opt.threads = threads;
  auto raw = sbas::invert_stack(stack, opt);
  data_cube disp = config.filter ? sbas::spatiotemporal_filter(raw.displacement, config.filter_window,
                                                               config.filter_sigma_cells)
                                 : raw.displacement;
  return {std::move(raw), std::move(disp)};
}

fuse::aligned_bundle align(const data_cube& displacement, const data_cube& groundwater,
                           const data_cube& precipitation, const texture_stack& texture, const run_config& config) {
  fuse::resample_spec spec{config.scenario.grid, config.spatial, config.temporal};
  return fuse::align_all(displacement, groundwater, precipitation, texture, spec);
}

sample_table dataset(const fuse::aligned_bundle& bundle, const run_config& config) {
  fuse::dataset_options opt;
  opt.include_forcing = config.include_forcing;
  opt.expected_epochs = config.scenario.grid.n_epochs();
  return fuse::build_dataset(bundle, opt);
}

prepared prepare(const run_config& config, int threads) {
  auto sc = synthgen::run_scenario(config.scenario);
  auto inv = invert(sc.stack, config, threads);
  auto bundle = align(inv.displacement, sc.drivers.groundwater, sc.drivers.precipitation, sc.texture, config);
  auto samples = dataset(bundle, config);
  return {std::move(sc), std::move(inv), std::move(bundle), std::move(samples), config.scenario.grid.epochs};
}

}  // namespace subsight::pipeline
