#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "subsight/error.hpp"
#include "subsight/evalstat.hpp"
#include "subsight/fuse.hpp"
#include "subsight/learn/model.hpp"
#include "subsight/synthgen.hpp"

namespace subsight {

struct run_config {
  std::uint64_t seed = 1;
  synthgen::scenario_config scenario = synthgen::default_scenario();

  bool estimate_dem = true;
  bool filter = true;
  std::size_t filter_window = 5;
  double filter_sigma_cells = 2.0;

  fuse::spatial_method spatial = fuse::spatial_method::bilinear;
  fuse::temporal_method temporal = fuse::temporal_method::linear;
  bool include_forcing = false;

  learn::model_spec model;

  std::vector<evalstat::protocol> protocols{evalstat::protocol::parse("holdout:0.6")};
  std::size_t folds = 10;
  evalstat::ablation_mode ablation = evalstat::ablation_mode::remove;
  double alpha = 0.05;
  std::size_t comparisons = 12;
};

// Every problem found in a config file, reported together.
class config_error : public usage_error {
 public:
  explicit config_error(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// key = value lines, `#` starts a comment. Keys absent from the text keep
// their defaults; unknown keys and invalid values are collected and thrown
// as one config_error.
run_config parse_config(std::string_view text);
run_config load_config(const std::filesystem::path& path);

// Every key with its effective value, in a fixed order; parses back to the
// same config.
std::string normalized_config(const run_config& config);

// Names of all accepted keys, excluding per-preset overrides
// (preset.<Name>.<field>).
std::vector<std::string> config_keys();

}  // namespace subsight
