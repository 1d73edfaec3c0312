#include "subsight/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "subsight/error.hpp"
#include "subsight/fuse.hpp"
#include "subsight/random.hpp"
#include "subsight/raster.hpp"

namespace subsight::synthgen {

namespace {

// Stream domains for rng keys.
enum : std::uint64_t {
  kTextureCell = 1,
  kTextureLayer,
  kGroundwaterAmp,
  kGroundwaterTrend,
  kPrecip,
  kBaseline,
  kDem,
  kTroposphere,
  kMeasurement,
  kPairBaseline,
};

constexpr double kDaysPerYear = 365.25;
constexpr std::size_t kLayers = texture_stack::n_layers;

double seasonal(double doy, double peak_doy) {
  return std::cos(2.0 * std::numbers::pi * (doy - peak_doy) / kDaysPerYear);
}

std::vector<double> draw_baselines(const scenario_config& config, std::size_t n) {
  std::vector<double> b(n);
  for (std::size_t t = 0; t < n; ++t)
    b[t] = rng_stream(stream_key(config.seed, kBaseline, t)).uniform(config.baseline_min_m, config.baseline_max_m);
  return b;
}

std::vector<double> draw_dem(const scenario_config& config, std::size_t n_cells) {
  std::vector<double> d(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c)
    d[c] = rng_stream(stream_key(config.seed, kDem, c)).uniform(config.dem_coeff_min, config.dem_coeff_max);
  return d;
}

}  // namespace

// ------------------------------------------------------------------ presets

void regime_preset::validate() const {
  for (double sd : {displacement_sd_mm, groundwater_sd_ft, rain_sd_mm, coarse_sd_pct})
    if (!(sd >= 0.0)) throw usage_error("preset " + name + ": standard deviations must be >= 0");
  if (!(coarse_mean_pct >= 0.0 && coarse_mean_pct <= 100.0))
    throw usage_error("preset " + name + ": coarse_mean_pct must lie in [0, 100]");
  if (!(rain_mean_mm >= 0.0)) throw usage_error("preset " + name + ": rain_mean_mm must be >= 0");
}

std::array<double, kLayers> normalize_profile(std::array<double, kLayers> raw) {
  double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / kLayers;
  double ss0 = 0.0;
  for (double v : raw) ss0 += (v - mean) * (v - mean);
  // Already-normalized input is returned untouched so echoing a profile
  // and reading it back is exact.
  if (std::abs(mean) < 1e-12 && std::abs(std::sqrt(ss0 / kLayers) - 1.0) < 1e-12) return raw;
  double ss = 0.0;
  for (auto& v : raw) {
    v -= mean;
    ss += v * v;
  }
  double rms = std::sqrt(ss / kLayers);
  if (rms > 0.0)
    for (auto& v : raw) v /= rms;
  return raw;
}

regime_preset chowchilla_preset() {
  regime_preset p;
  p.name = "Chowchilla";
  p.displacement_mean_mm = -22.47;
  p.displacement_sd_mm = 10.66;
  p.groundwater_mean_ft = 95.53;
  p.groundwater_sd_ft = 27.69;
  p.rain_mean_mm = 0.84;
  p.rain_sd_mm = 0.80;
  p.coarse_mean_pct = 27.44;
  p.coarse_sd_pct = 10.13;
  p.layer_profile = normalize_profile({1.0, 0.6, 0.0, -0.6, -1.0, -1.0, -0.6, 0.0, 0.6, 1.0});
  return p;
}

regime_preset helm_preset() {
  regime_preset p;
  p.name = "Helm";
  p.displacement_mean_mm = -40.95;
  p.displacement_sd_mm = 14.49;
  p.groundwater_mean_ft = 160.52;
  p.groundwater_sd_ft = 65.82;
  p.rain_mean_mm = 3.48;
  p.rain_sd_mm = 3.15;
  p.coarse_mean_pct = 40.01;
  p.coarse_sd_pct = 1.67;
  p.layer_profile = normalize_profile({-1.0, -0.6, -0.3, 0.0, 0.2, 0.3, 0.4, 0.4, 0.3, 0.3});
  return p;
}

std::optional<regime_preset> builtin_preset(std::string_view name) {
  if (name == "Chowchilla") return chowchilla_preset();
  if (name == "Helm") return helm_preset();
  return std::nullopt;
}

double compaction_params::coupling(double mean_coarse_pct) const {
  return std::clamp(mean_coarse_pct / 100.0, 0.0, 1.0);
}

void compaction_params::validate() const {
  if (!(elastic_coeff_mm_per_ft >= 0.0) || !(inelastic_coeff_mm_per_ft >= 0.0))
    throw usage_error("compaction coefficients must be >= 0");
}

std::string_view layout_name(region_layout l) { return l == region_layout::single ? "single" : "stripes"; }

region_layout parse_layout(std::string_view name) {
  if (name == "single") return region_layout::single;
  if (name == "stripes") return region_layout::stripes;
  throw usage_error("unknown region layout '" + std::string(name) + "' (single|stripes)");
}

// ------------------------------------------------------------------- config

void scenario_config::validate() const {
  grid.validate();
  if (acquisition_spacing_days < 1) throw usage_error("acquisition spacing must be >= 1 day");
  if (!(baseline_min_m <= baseline_max_m)) throw usage_error("baseline range is empty");
  if (max_pair_days < 0) throw usage_error("max_pair_days must be >= 0");
  if (!(texture_cell_m > 0.0)) throw usage_error("texture cell size must be > 0");
  if (!(texture_smoothing_cells >= 0.0)) throw usage_error("texture smoothing must be >= 0");
  for (double w : {texture_cell_weight, texture_profile_weight, texture_layer_noise_weight})
    if (!(w >= 0.0)) throw usage_error("texture weights must be >= 0");
  if (active_cells > grid.space.cells()) throw usage_error("active_cells exceeds the grid size");
  if (regions.empty()) throw usage_error("scenario needs at least one region preset");
  for (const auto& r : regions) r.validate();
  compaction.validate();
  if (!(gw_seasonal_share >= 0.0) || !(gw_cell_jitter >= 0.0)) throw usage_error("groundwater shape must be >= 0");
  for (auto m : gw_months)
    if (m < 1 || m > 12) throw usage_error("groundwater months must lie in 1..12");
  if (!(precip_seasonal_amp >= 0.0 && precip_seasonal_amp <= 1.0))
    throw usage_error("precipitation seasonal amplitude must lie in [0, 1]");
  if (!(troposphere_sd_mm >= 0.0) || !(troposphere_sigma_cells >= 0.0) || !(measurement_sd_mm >= 0.0))
    throw usage_error("noise levels must be >= 0");
  if (!(dem_coeff_min <= dem_coeff_max)) throw usage_error("DEM coefficient range is empty");
  if (!(pair_baseline_jitter_m >= 0.0)) throw usage_error("pair_baseline_jitter_m must be >= 0");
}

spatial_grid scenario_config::texture_grid() const {
  if (texture_cell_m == grid.space.cell_size_m) return grid.space;
  spatial_grid t;
  t.cell_size_m = texture_cell_m;
  t.origin_x = grid.space.origin_x - 0.5 * texture_cell_m;
  t.origin_y = grid.space.origin_y - 0.5 * texture_cell_m;
  t.cols = static_cast<std::size_t>(std::ceil(grid.space.extent_x() / texture_cell_m)) + 1;
  t.rows = static_cast<std::size_t>(std::ceil(grid.space.extent_y() / texture_cell_m)) + 1;
  return t;
}

sbas::acquisition_set scenario_config::acquisitions() const {
  const int span = grid.epochs.back() - grid.epochs.front();
  const int n = (span + acquisition_spacing_days - 1) / acquisition_spacing_days + 1;
  sbas::acquisition_set acq;
  for (int k = 0; k < n; ++k) acq.dates.push_back(grid.epochs.front() + k * acquisition_spacing_days);
  acq.bperp_m = draw_baselines(*this, acq.dates.size());
  return acq;
}

space_time_grid scenario_config::acquisition_grid() const {
  space_time_grid g{grid.space, acquisitions().dates, acquisition_spacing_days};
  g.validate();
  return g;
}

std::vector<unsigned char> scenario_config::active_mask() const {
  const auto& g = grid.space;
  std::vector<unsigned char> mask(g.cells(), 1);
  if (active_cells == 0 || active_cells == g.cells()) return mask;
  const double cx = 0.5 * static_cast<double>(g.cols), cy = 0.5 * static_cast<double>(g.rows);
  std::vector<std::pair<double, std::size_t>> rank;
  rank.reserve(g.cells());
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) {
      double dx = (static_cast<double>(c) + 0.5 - cx) / cx;
      double dy = (static_cast<double>(r) + 0.5 - cy) / cy;
      rank.emplace_back(dx * dx + dy * dy, g.cell_id(r, c));
    }
  std::sort(rank.begin(), rank.end());
  std::fill(mask.begin(), mask.end(), 0);
  for (std::size_t k = 0; k < active_cells; ++k) mask[rank[k].second] = 1;
  return mask;
}

const regime_preset& scenario_config::region_at(double x_m) const {
  if (layout == region_layout::single || regions.size() == 1) return regions.front();
  double f = (x_m - grid.space.origin_x) / grid.space.extent_x();
  auto n = static_cast<double>(regions.size());
  auto k = static_cast<long long>(std::floor(f * n));
  k = std::clamp<long long>(k, 0, static_cast<long long>(regions.size()) - 1);
  return regions[static_cast<std::size_t>(k)];
}

scenario_config default_scenario() {
  scenario_config c;
  spatial_grid space{40, 40, 2000.0, 0.0, 0.0};
  c.grid = make_regular_grid(space, date::from_ymd(2015, 3, 1), 132, 14);
  c.regions = {chowchilla_preset(), helm_preset()};
  return c;
}

scenario_config full_scale_scenario() {
  scenario_config c = default_scenario();
  spatial_grid space{94, 94, 2000.0, 0.0, 0.0};
  c.grid = make_regular_grid(space, date::from_ymd(2015, 3, 1), 132, 14);
  c.active_cells = 8818;
  return c;
}

// ---------------------------------------------------------------- texture

texture_stack generate_texture(const scenario_config& config) {
  config.validate();
  const spatial_grid g = config.texture_grid();
  std::vector<double> white(g.cells());
  for (std::size_t cell = 0; cell < g.cells(); ++cell)
    white[cell] = rng_stream(stream_key(config.seed, kTextureCell, cell)).normal();
  const auto latent = raster::smooth_white_noise(white, g, config.texture_smoothing_cells);

  texture_stack tex(g);
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      const std::size_t cell = g.cell_id(r, c);
      const auto& preset = config.region_at(g.center_x(c));
      rng_stream rng(stream_key(config.seed, kTextureLayer, cell));
      for (std::size_t l = 0; l < kLayers; ++l) {
        double z = config.texture_cell_weight * latent[cell] + config.texture_profile_weight * preset.layer_profile[l] +
                   config.texture_layer_noise_weight * rng.normal();
        tex.set(cell, l, std::clamp(preset.coarse_mean_pct + preset.coarse_sd_pct * z, 0.0, 100.0));
      }
    }
  }
  return tex;
}

// ---------------------------------------------------------------- forcing

forcing generate_forcing(const scenario_config& config) {
  config.validate();
  const space_time_grid grid = config.acquisition_grid();
  const auto& g = grid.space;
  const auto active = config.active_mask();
  forcing out{data_cube(grid, variable::groundwater_ft), data_cube(grid, variable::precipitation_mm)};

  std::vector<double> doy(grid.n_epochs()), years(grid.n_epochs());
  std::vector<bool> in_months(grid.n_epochs());
  for (std::size_t t = 0; t < grid.n_epochs(); ++t) {
    doy[t] = grid.epochs[t].day_of_year();
    years[t] = static_cast<double>(grid.epochs[t] - grid.epochs[0]) / kDaysPerYear;
    in_months[t] = config.gw_months.empty() ||
                   std::find(config.gw_months.begin(), config.gw_months.end(), grid.epochs[t].month()) !=
                       config.gw_months.end();
  }

  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      const std::size_t cell = g.cell_id(r, c);
      if (!active[cell]) {
        out.groundwater.mask_cell(cell);
        out.precipitation.mask_cell(cell);
        continue;
      }
      const auto& p = config.region_at(g.center_x(c));

      double amp_scale = 1.0 + config.gw_cell_jitter * rng_stream(stream_key(config.seed, kGroundwaterAmp, cell)).normal();
      double trend_scale =
          1.0 + config.gw_cell_jitter * rng_stream(stream_key(config.seed, kGroundwaterTrend, cell)).normal();
      double amp = std::numbers::sqrt2 * p.groundwater_sd_ft * config.gw_seasonal_share * std::max(0.0, amp_scale);
      double trend = config.gw_trend_ft_per_year * trend_scale;
      for (std::size_t t = 0; t < grid.n_epochs(); ++t) {
        double dev = in_months[t] ? amp * seasonal(doy[t], config.gw_peak_doy) + trend * years[t] : 0.0;
        out.groundwater.set(cell, t, p.groundwater_mean_ft + dev);
      }

      // Seasonal mean times unit-mean gamma noise; shape chosen so the
      // marginal standard deviation matches the preset.
      double a = 0.0, inv_shape = 0.0;
      if (p.rain_mean_mm > 0.0 && p.rain_sd_mm > 0.0) {
        double cv2 = (p.rain_sd_mm / p.rain_mean_mm) * (p.rain_sd_mm / p.rain_mean_mm);
        a = config.precip_seasonal_amp;
        inv_shape = (1.0 + cv2) / (1.0 + 0.5 * a * a) - 1.0;
        if (inv_shape <= 0.0) {
          a = std::min(a, std::sqrt(2.0 * cv2));
          inv_shape = 0.0;
        }
      }
      rng_stream rng(stream_key(config.seed, kPrecip, cell));
      for (std::size_t t = 0; t < grid.n_epochs(); ++t) {
        double v = p.rain_mean_mm * (1.0 + a * seasonal(doy[t], config.precip_peak_doy));
        if (inv_shape > 0.0) v *= rng.gamma(1.0 / inv_shape) * inv_shape;
        out.precipitation.set(cell, t, std::max(0.0, v));
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ compaction

std::vector<double> simulate_cell(std::span<const double> head_ft, double elastic_fraction,
                                  const compaction_params& params) {
  std::vector<double> out(head_ft.size(), 0.0);
  if (head_ft.empty()) return out;
  const double h0 = head_ft[0];
  const double e = elastic_fraction;
  double drop_below_preconsolidation = 0.0;
  for (std::size_t t = 0; t < head_ft.size(); ++t) {
    drop_below_preconsolidation = std::max(drop_below_preconsolidation, h0 - head_ft[t]);
    double elastic = e * params.elastic_coeff_mm_per_ft * (head_ft[t] - h0);
    double inelastic = (1.0 - e) * params.inelastic_coeff_mm_per_ft * drop_below_preconsolidation;
    out[t] = elastic - inelastic;
  }
  return out;
}

data_cube simulate_displacement(const texture_stack& texture, const data_cube& groundwater,
                                const compaction_params& params) {
  params.validate();
  if (!(texture.grid() == groundwater.grid().space))
    throw geometry_error("texture and groundwater grids do not share spatial geometry");
  data_cube out(groundwater.grid(), variable::displacement_mm);
  std::vector<double> head(groundwater.n_epochs());
  for (std::size_t cell = 0; cell < out.n_cells(); ++cell) {
    if (!groundwater.cell_fully_valid(cell) || !texture.cell_defined(cell)) {
      out.mask_cell(cell);
      continue;
    }
    for (std::size_t t = 0; t < head.size(); ++t) head[t] = -groundwater.at(cell, t);
    auto disp = simulate_cell(head, params.coupling(texture.mean_coarse(cell)), params);
    for (std::size_t t = 0; t < head.size(); ++t) out.set(cell, t, disp[t]);
  }
  return out;
}

// --------------------------------------------------------- interferograms

std::vector<double> dem_coefficients(const scenario_config& config) {
  return draw_dem(config, config.grid.space.cells());
}

sbas::interferogram_stack synth_interferograms(const data_cube& displacement, std::span<const sbas::epoch_pair> pairs,
                                               const scenario_config& config) {
  sbas::acquisition_set acq{displacement.grid().epochs, draw_baselines(config, displacement.n_epochs())};
  return synth_interferograms(displacement, pairs, acq, draw_dem(config, displacement.n_cells()), config);
}

sbas::interferogram_stack synth_interferograms(const data_cube& displacement, std::span<const sbas::epoch_pair> pairs,
                                               const sbas::acquisition_set& acquisitions,
                                               std::span<const double> dem_coeff_mm_per_m,
                                               const scenario_config& config) {
  const std::size_t n_epochs = displacement.n_epochs(), n_cells = displacement.n_cells();
  if (acquisitions.dates != displacement.grid().epochs)
    throw data_error("acquisition dates do not match the displacement epochs");
  if (dem_coeff_mm_per_m.size() != n_cells) throw data_error("need one DEM coefficient per cell");
  for (const auto& p : pairs)
    if (p.j <= p.i || p.j >= n_epochs)
      throw data_error("invalid pair index (" + std::to_string(p.i) + "," + std::to_string(p.j) + ")");

  const auto& g = displacement.grid().space;
  std::vector<double> atmosphere;
  if (config.troposphere_sd_mm > 0.0) {
    atmosphere.resize(n_epochs * n_cells);
    std::vector<double> white(n_cells);
    for (std::size_t t = 0; t < n_epochs; ++t) {
      rng_stream rng(stream_key(config.seed, kTroposphere, t));
      for (auto& w : white) w = rng.normal();
      auto screen = raster::smooth_white_noise(white, g, config.troposphere_sigma_cells);
      for (std::size_t c = 0; c < n_cells; ++c) atmosphere[t * n_cells + c] = config.troposphere_sd_mm * screen[c];
    }
  }

  // Each interferogram's baseline departs from the acquisition difference
  // by a per-pair term (orbit tube drift); this is what lets the DEM term
  // separate from displacement.
  std::vector<double> pair_b = sbas::pair_baselines(pairs, acquisitions);
  if (config.pair_baseline_jitter_m > 0.0)
    for (std::size_t k = 0; k < pairs.size(); ++k)
      pair_b[k] += config.pair_baseline_jitter_m *
                   rng_stream(stream_key(config.seed, kPairBaseline, pairs[k].i, pairs[k].j)).normal();

  sbas::interferogram_stack stack(g, acquisitions, std::vector<sbas::epoch_pair>(pairs.begin(), pairs.end()),
                                  config.max_pair_days, pair_b);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const double dbperp = pair_b[k];
    rng_stream meas(stream_key(config.seed, kMeasurement, k));
    for (std::size_t c = 0; c < n_cells; ++c) {
      double noise = config.measurement_sd_mm > 0.0 ? config.measurement_sd_mm * meas.normal() : 0.0;
      auto a = displacement.get(c, i);
      auto b = displacement.get(c, j);
      if (!a || !b) {
        stack.mask(k, c);
        continue;
      }
      double obs = *b - *a + dem_coeff_mm_per_m[c] * dbperp;
      if (!atmosphere.empty()) obs += atmosphere[j * n_cells + c] - atmosphere[i * n_cells + c];
      stack.set(k, c, obs + noise);
    }
  }
  return stack;
}

scenario run_scenario(const scenario_config& config) {
  config.validate();
  texture_stack texture = generate_texture(config);
  texture_stack on_grid = fuse::resample_texture(texture, config.grid.space, fuse::spatial_method::bilinear);
  forcing drivers = generate_forcing(config);
  data_cube disp = simulate_displacement(on_grid, drivers.groundwater, config.compaction);
  sbas::acquisition_set acq = config.acquisitions();
  auto pairs = sbas::build_pairs(acq, config.max_pair_days);
  auto dem = dem_coefficients(config);
  auto stack = synth_interferograms(disp, pairs, acq, dem, config);
  return scenario{std::move(texture), std::move(on_grid), std::move(drivers), std::move(disp), std::move(dem),
                  std::move(stack)};
}

}  // namespace subsight::synthgen
