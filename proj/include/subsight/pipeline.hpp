#pragma once

#include <vector>

#include "subsight/config.hpp"
#include "subsight/fuse.hpp"
#include "subsight/sbas.hpp"
#include "subsight/synthgen.hpp"

namespace subsight::pipeline {

struct inversion_outputs {
  sbas::inversion_result raw;
  data_cube displacement;  // filtered when the config asks for it
};

inversion_outputs invert(const sbas::interferogram_stack& stack, const run_config& config, int threads = 1);

// Aligns every source onto the canonical grid of the config.
fuse::aligned_bundle align(const data_cube& displacement, const data_cube& groundwater,
                           const data_cube& precipitation, const texture_stack& texture, const run_config& config);

sample_table dataset(const fuse::aligned_bundle& bundle, const run_config& config);

// The whole chain in memory: simulate, invert, filter, align, tabulate.
struct prepared {
  synthgen::scenario scenario;
  inversion_outputs inversion;
  fuse::aligned_bundle bundle;
  sample_table samples;
  std::vector<date> epochs;  // feature time axis
};

prepared prepare(const run_config& config, int threads = 1);

}  // namespace subsight::pipeline
