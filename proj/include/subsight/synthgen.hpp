#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "subsight/gridstore.hpp"
#include "subsight/sbas.hpp"

namespace subsight::synthgen {

// Region statistics a generated cell is drawn from. The layer profile is a
// zero-mean, unit-RMS shape giving how coarseness varies with depth.
struct regime_preset {
  std::string name;
  double displacement_mean_mm = 0.0;
  double displacement_sd_mm = 0.0;
  double groundwater_mean_ft = 0.0;
  double groundwater_sd_ft = 0.0;
  double rain_mean_mm = 0.0;
  double rain_sd_mm = 0.0;
  double coarse_mean_pct = 0.0;
  double coarse_sd_pct = 0.0;
  std::array<double, texture_stack::n_layers> layer_profile{};

  void validate() const;
};

// Monotonic decline with a fine-grained middle section, low rain.
regime_preset chowchilla_preset();
// Strong seasonal head swings, high rain, coarse throughout.
regime_preset helm_preset();
std::optional<regime_preset> builtin_preset(std::string_view name);

// Rescales a raw layer shape to zero mean and unit RMS (all zeros stays zero).
std::array<double, texture_stack::n_layers> normalize_profile(std::array<double, texture_stack::n_layers> raw);

struct compaction_params {
  double elastic_coeff_mm_per_ft = 0.5;
  double inelastic_coeff_mm_per_ft = 1.0;

  // Elastic fraction for a layer-mean coarse percent: coarse / 100.
  double coupling(double mean_coarse_pct) const;
  void validate() const;
};

enum class region_layout { single, stripes };

std::string_view layout_name(region_layout l);
region_layout parse_layout(std::string_view name);

struct scenario_config {
  // Canonical biweekly grid that the model dataset lives on.
  space_time_grid grid;
  // SAR acquisitions start at the first grid epoch and cover the grid span.
  int acquisition_spacing_days = 12;
  double baseline_min_m = -150.0;
  double baseline_max_m = 150.0;
  int max_pair_days = 24;

  // Texture lives on its own grid (1-mile cells by default) covering the canonical extent.
  double texture_cell_m = 1609.344;
  double texture_smoothing_cells = 1.5;
  double texture_cell_weight = 0.8;
  double texture_profile_weight = 0.5;
  double texture_layer_noise_weight = 0.3;
  // Cells kept active (ranked by elliptical distance from the grid center); 0 keeps all.
  std::size_t active_cells = 0;

  region_layout layout = region_layout::stripes;
  std::vector<regime_preset> regions;
  compaction_params compaction;

  double gw_seasonal_share = 0.9;
  double gw_peak_doy = 240.0;
  double gw_trend_ft_per_year = 4.0;
  double gw_cell_jitter = 0.1;
  // Groundwater departs from its mean only in these calendar months (empty: all).
  std::vector<unsigned> gw_months;
  double precip_peak_doy = 15.0;
  double precip_seasonal_amp = 0.9;

  double troposphere_sd_mm = 5.0;
  double troposphere_sigma_cells = 3.0;
  double measurement_sd_mm = 1.0;
  double dem_coeff_min = -0.1;
  double dem_coeff_max = 0.1;
  // Per-interferogram departure from additive baselines. Zero makes the DEM
  // term inseparable from displacement.
  double pair_baseline_jitter_m = 30.0;

  std::uint64_t seed = 1;

  void validate() const;
  spatial_grid texture_grid() const;
  sbas::acquisition_set acquisitions() const;
  space_time_grid acquisition_grid() const;
  std::vector<unsigned char> active_mask() const;
  // Preset governing a planar x coordinate.
  const regime_preset& region_at(double x_m) const;
};

// Desk-scale default: 40 x 40 cells of 2 km, 132 biweekly epochs from
// 2015-03-01, Chowchilla and Helm in two stripes.
scenario_config default_scenario();

// Study-sized variant: 94 x 94 cells with the 8818 most central active.
scenario_config full_scale_scenario();

texture_stack generate_texture(const scenario_config& config);

struct forcing {
  data_cube groundwater;    // depth below surface, ft
  data_cube precipitation;  // mm
};

// On the acquisition grid; inactive cells are masked.
forcing generate_forcing(const scenario_config& config);

// Compaction recurrence for one cell. head_ft is -depth per epoch; the
// result is relative to epoch 0.
std::vector<double> simulate_cell(std::span<const double> head_ft, double elastic_fraction,
                                  const compaction_params& params);

data_cube simulate_displacement(const texture_stack& texture, const data_cube& groundwater,
                                const compaction_params& params);

std::vector<double> dem_coefficients(const scenario_config& config);

sbas::interferogram_stack synth_interferograms(const data_cube& displacement, std::span<const sbas::epoch_pair> pairs,
                                               const scenario_config& config);

// Forward model with explicit geometry, used by synth_interferograms.
sbas::interferogram_stack synth_interferograms(const data_cube& displacement, std::span<const sbas::epoch_pair> pairs,
                                               const sbas::acquisition_set& acquisitions,
                                               std::span<const double> dem_coeff_mm_per_m,
                                               const scenario_config& config);

struct scenario {
  texture_stack texture;          // native texture grid
  texture_stack texture_on_grid;  // resampled to the canonical spatial grid
  forcing drivers;
  data_cube displacement;  // truth, on the acquisition grid
  std::vector<double> dem_coeff_mm_per_m;
  sbas::interferogram_stack stack;
};

scenario run_scenario(const scenario_config& config);

}  // namespace subsight::synthgen
