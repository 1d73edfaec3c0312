#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "subsight/error.hpp"
#include "subsight/synthgen.hpp"
#include "support.hpp"

using namespace subsight;
using namespace subsight::synthgen;

namespace {

scenario_config single_region(const regime_preset& p, std::size_t side) {
  auto c = default_scenario();
  c.grid = make_regular_grid({side, side, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), 132, 14);
  c.layout = region_layout::single;
  c.regions = {p};
  c.texture_cell_m = 2000.0;
  return c;
}

double seasonal_range(std::span<const double> v, std::size_t from) {
  auto [lo, hi] = std::minmax_element(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
  return *hi - *lo;
}

}  // namespace

TEST_CASE("presets carry the regional statistics") {
  auto c = chowchilla_preset();
  CHECK(c.displacement_mean_mm == -22.47);
  CHECK(c.displacement_sd_mm == 10.66);
  auto h = helm_preset();
  CHECK(h.coarse_mean_pct == 40.01);
  CHECK(h.coarse_sd_pct == 1.67);
  CHECK(h.rain_mean_mm == 3.48);
  CHECK(h.rain_sd_mm == 3.15);
  for (const auto& p : {c, h}) {
    double mean = std::accumulate(p.layer_profile.begin(), p.layer_profile.end(), 0.0) / 10.0;
    double ss = 0.0;
    for (double v : p.layer_profile) ss += v * v;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::sqrt(ss / 10.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("normalize_profile is idempotent and keeps zeros") {
  auto once = normalize_profile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(normalize_profile(once) == once);
  std::array<double, 10> zeros{};
  CHECK(normalize_profile(zeros) == zeros);
}

TEST_CASE("Helm texture mean over 10^4 cells without smoothing") {
  auto cfg = single_region(helm_preset(), 100);
  cfg.texture_smoothing_cells = 0.0;
  auto tex = generate_texture(cfg);
  REQUIRE(tex.n_cells() == 10000);
  double sum = 0.0;
  for (std::size_t c = 0; c < tex.n_cells(); ++c) sum += tex.mean_coarse(c);
  CHECK(std::abs(sum / 1e4 - 40.01) <= 0.5);
}

TEST_CASE("zero-sd preset gives exactly its mean") {
  auto p = chowchilla_preset();
  p.coarse_mean_pct = 27.44;
  p.coarse_sd_pct = 0.0;
  auto tex = generate_texture(single_region(p, 6));
  for (std::size_t c = 0; c < tex.n_cells(); ++c)
    for (std::size_t l = 0; l < 10; ++l) CHECK(tex.at(c, l) == 27.44);
}

TEST_CASE("generation is deterministic") {
  auto cfg = default_scenario();
  cfg.grid = make_regular_grid({6, 7, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), 30, 14);
  auto a = run_scenario(cfg);
  auto b = run_scenario(cfg);
  CHECK(a.texture == b.texture);
  CHECK(a.drivers.groundwater == b.drivers.groundwater);
  CHECK(a.drivers.precipitation == b.drivers.precipitation);
  CHECK(a.displacement == b.displacement);
  CHECK(a.stack == b.stack);
  cfg.seed = 2;
  CHECK_FALSE(run_scenario(cfg).stack == a.stack);
}

TEST_CASE("forcing statistics") {
  SUBCASE("Helm precipitation mean over a long run") {
    auto cfg = single_region(helm_preset(), 10);
    cfg.grid = make_regular_grid({10, 10, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), 26 * 10, 14);
    auto f = generate_forcing(cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < f.precipitation.n_cells(); ++c)
      for (std::size_t t = 0; t < f.precipitation.n_epochs(); ++t, ++n) sum += f.precipitation.at(c, t);
    CHECK(std::abs(sum / static_cast<double>(n) - 3.48) <= 0.5);
  }
  SUBCASE("zero amplitude gives constant cubes") {
    auto p = helm_preset();
    p.rain_sd_mm = 0.0;
    auto cfg = single_region(p, 4);
    cfg.gw_seasonal_share = 0.0;
    cfg.gw_trend_ft_per_year = 0.0;
    cfg.precip_seasonal_amp = 0.0;
    auto f = generate_forcing(cfg);
    for (std::size_t c = 0; c < 16; ++c)
      for (std::size_t t = 0; t < f.groundwater.n_epochs(); ++t) {
        CHECK(f.groundwater.at(c, t) == p.groundwater_mean_ft);
        CHECK(f.precipitation.at(c, t) == p.rain_mean_mm);
      }
  }
  SUBCASE("winter-peaking rain: December above June") {
    auto cfg = single_region(helm_preset(), 5);
    cfg.grid = make_regular_grid({5, 5, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), 26 * 6, 14);
    auto f = generate_forcing(cfg);
    double dec = 0.0, jun = 0.0;
    std::size_t nd = 0, nj = 0;
    const auto& dates = f.precipitation.grid().epochs;
    for (std::size_t t = 0; t < dates.size(); ++t)
      for (std::size_t c = 0; c < 25; ++c) {
        if (dates[t].month() == 12) dec += f.precipitation.at(c, t), ++nd;
        if (dates[t].month() == 6) jun += f.precipitation.at(c, t), ++nj;
      }
    CHECK(dec / static_cast<double>(nd) > jun / static_cast<double>(nj));
  }
  SUBCASE("groundwater confined to listed months") {
    auto cfg = single_region(helm_preset(), 3);
    cfg.gw_months = {10};
    cfg.gw_trend_ft_per_year = 0.0;
    auto f = generate_forcing(cfg);
    const auto& dates = f.groundwater.grid().epochs;
    for (std::size_t t = 0; t < dates.size(); ++t)
      if (dates[t].month() != 10) CHECK(f.groundwater.at(4, t) == helm_preset().groundwater_mean_ft);
  }
}

TEST_CASE("compaction recurrence") {
  compaction_params elastic{0.1, 0.0};
  compaction_params inelastic{0.0, 0.1};
  SUBCASE("constant head") {
    std::vector<double> h(9, -50.0);
    for (double e : {0.0, 0.3, 1.0})
      for (double v : simulate_cell(h, e, {0.5, 1.0})) CHECK(v == 0.0);
  }
  SUBCASE("pure elastic drop and recovery") {
    std::vector<double> h{0.0, -10.0, 0.0};
    auto d = simulate_cell(h, 1.0, elastic);
    CHECK(d[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(d[2] == 0.0);
  }
  SUBCASE("inelastic ratchet") {
    std::vector<double> h{0.0, -10.0, -5.0, -20.0};
    auto d = simulate_cell(h, 0.0, inelastic);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(d[2] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(d[3] == doctest::Approx(-2.0).epsilon(1e-15));
  }
  SUBCASE("coupling is coarse / 100 and monotone") {
    compaction_params p;
    CHECK(p.coupling(40.0) == 0.4);
    for (int k = 0; k < 100; ++k) CHECK(p.coupling(k) <= p.coupling(k + 1));
  }
}

TEST_CASE("elastic reversibility and inelastic monotonicity over random head paths") {
  for (std::uint64_t trial = 0; trial < 300; ++trial) {
    rng_stream rng(stream_key(21, trial));
    std::size_t n = 2 + rng.below(40);
    std::vector<double> h(n);
    for (auto& v : h) v = rng.uniform(-100.0, 100.0);
    h.back() = h.front();
    compaction_params p{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
    CHECK(simulate_cell(h, 1.0, p).back() == 0.0);
    auto d = simulate_cell(h, 0.0, p);
    for (std::size_t t = 1; t < n; ++t) CHECK(d[t] <= d[t - 1]);
  }
}

TEST_CASE("seasonal amplitude grows with coarse percent") {
  std::vector<double> head;
  for (int t = 0; t < 78; ++t) head.push_back(-100.0 - 30.0 * std::sin(2.0 * std::numbers::pi * t / 26.0));
  compaction_params p;
  double prev = -1.0;
  for (double coarse : {5.0, 20.0, 40.0, 60.0, 95.0}) {
    auto d = simulate_cell(head, p.coupling(coarse), p);
    double amp = seasonal_range(d, 26);
    CHECK(amp > prev);
    prev = amp;
  }
}

TEST_CASE("forward interferogram model") {
  space_time_grid g = make_regular_grid({2, 2, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), 3, 12);
  auto cfg = default_scenario();
  cfg.troposphere_sd_mm = 0.0;
  cfg.measurement_sd_mm = 0.0;
  cfg.pair_baseline_jitter_m = 0.0;
  std::vector<sbas::epoch_pair> pairs{{0, 1}, {0, 2}, {1, 2}};

  SUBCASE("no noise, no DEM error gives pure differences") {
    data_cube d(g, variable::displacement_mm);
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t t = 0; t < 3; ++t) d.set(c, t, 1.7 * static_cast<double>(c) - 0.3 * static_cast<double>(t * t));
    sbas::acquisition_set acq{g.epochs, {5.0, -40.0, 90.0}};
    std::vector<double> dem(4, 0.0);
    auto st = synth_interferograms(d, pairs, acq, dem, cfg);
    for (std::size_t k = 0; k < pairs.size(); ++k)
      for (std::size_t c = 0; c < 4; ++c) CHECK(st.at(k, c) == d.at(c, pairs[k].j) - d.at(c, pairs[k].i));
  }
  SUBCASE("DEM error with baselines 10 and 25 m") {
    space_time_grid g2 = make_regular_grid({2, 2, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), 2, 12);
    data_cube d(g2, variable::displacement_mm, 0.0);
    sbas::acquisition_set acq{g2.epochs, {10.0, 25.0}};
    std::vector<sbas::epoch_pair> one{{0, 1}};
    std::vector<double> dem(4, 1.0);
    auto st = synth_interferograms(d, one, acq, dem, cfg);
    for (std::size_t c = 0; c < 4; ++c) CHECK(st.at(0, c) == 15.0);
  }
  SUBCASE("invalid pair index") {
    data_cube d(g, variable::displacement_mm, 0.0);
    sbas::acquisition_set acq{g.epochs, {0.0, 0.0, 0.0}};
    std::vector<double> dem(4, 0.0);
    std::vector<sbas::epoch_pair> bad{{1, 3}};
    CHECK_THROWS_AS(synth_interferograms(d, bad, acq, dem, cfg), data_error);
    std::vector<sbas::epoch_pair> reversed{{2, 1}};
    CHECK_THROWS_AS(synth_interferograms(d, reversed, acq, dem, cfg), data_error);
  }
  SUBCASE("pair baselines depart from differences when jitter is on") {
    cfg.pair_baseline_jitter_m = 30.0;
    data_cube d(g, variable::displacement_mm, 0.0);
    sbas::acquisition_set acq{g.epochs, {5.0, -40.0, 90.0}};
    std::vector<double> dem(4, 0.5);
    auto st = synth_interferograms(d, pairs, acq, dem, cfg);
    auto additive = sbas::pair_baselines(pairs, acq);
    bool any_differs = false;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      any_differs = any_differs || st.pair_baselines()[k] != additive[k];
      CHECK(st.at(k, 0) == doctest::Approx(0.5 * st.pair_baselines()[k]).epsilon(1e-14));
    }
    CHECK(any_differs);
  }
}

TEST_CASE("full-scale preset") {
  auto c = full_scale_scenario();
  auto mask = c.active_mask();
  CHECK(std::count(mask.begin(), mask.end(), 1) == 8818);
  CHECK(c.grid.n_epochs() == 132);
}
