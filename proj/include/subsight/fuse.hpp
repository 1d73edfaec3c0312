#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "subsight/gridstore.hpp"

namespace subsight::fuse {

enum class spatial_method { bilinear, nearest };
enum class temporal_method { linear, nearest };

std::string_view method_name(spatial_method m);
std::string_view method_name(temporal_method m);
spatial_method parse_spatial_method(std::string_view name);
temporal_method parse_temporal_method(std::string_view name);

struct resample_spec {
  space_time_grid target;
  spatial_method spatial = spatial_method::bilinear;
  temporal_method temporal = temporal_method::linear;
};

// Bilinear blends the four source centers around each target center and
// masks the target if any of them is masked or out of bounds. Nearest takes
// the closest source center (ties go to the lower index).
data_cube resample_spatial(const data_cube& cube, const spatial_grid& target, spatial_method method);
texture_stack resample_texture(const texture_stack& texture, const spatial_grid& target, spatial_method method);

// Interpolates between bracketing source epochs; never extrapolates.
data_cube resample_temporal(const data_cube& cube, std::span<const date> target, temporal_method method);

struct aligned_bundle {
  data_cube displacement;
  data_cube groundwater;
  data_cube precipitation;
  texture_stack texture;
  // cell x epoch conjunction of every source mask.
  std::vector<unsigned char> joint_mask;

  bool jointly_valid(std::size_t cell, std::size_t epoch) const {
    return joint_mask[cell * displacement.n_epochs() + epoch] != 0;
  }
};

aligned_bundle align_all(const data_cube& displacement, const data_cube& groundwater,
                         const data_cube& precipitation, const texture_stack& texture, const resample_spec& spec);

struct dataset_options {
  // Append groundwater and precipitation histories after displacement.
  bool include_forcing = false;
  // When set, the bundle must have exactly this many epochs.
  std::optional<std::size_t> expected_epochs;
};

sample_table build_dataset(const aligned_bundle& bundle, const dataset_options& options = {});

}  // namespace subsight::fuse
