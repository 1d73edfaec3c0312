#include "subsight/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "subsight/error.hpp"

namespace subsight::fuse {

std::string_view method_name(spatial_method m) { return m == spatial_method::bilinear ? "bilinear" : "nearest"; }
std::string_view method_name(temporal_method m) { return m == temporal_method::linear ? "linear" : "nearest"; }

spatial_method parse_spatial_method(std::string_view name) {
  if (name == "bilinear") return spatial_method::bilinear;
  if (name == "nearest") return spatial_method::nearest;
  throw usage_error("unknown spatial method '" + std::string(name) + "' (bilinear|nearest)");
}

temporal_method parse_temporal_method(std::string_view name) {
  if (name == "linear") return temporal_method::linear;
  if (name == "nearest") return temporal_method::nearest;
  throw usage_error("unknown temporal method '" + std::string(name) + "' (linear|nearest)");
}

namespace {

// Continuous source index of a target coordinate, snapped to the nearest
// integer when within rounding distance so coincident centers stay exact.
double source_coord(double target, double origin, double cell) {
  double f = (target - origin) / cell - 0.5;
  double r = std::round(f);
  if (std::abs(f - r) < 1e-9) return r;
  return f;
}

struct tap {
  std::size_t index;
  double weight;
};

// Up to two taps along one axis; empty when a needed tap is out of bounds.
std::vector<tap> axis_taps(double f, std::size_t n, spatial_method method) {
  if (method == spatial_method::nearest) {
    double k = std::ceil(f - 0.5);
    if (k < 0 || k >= static_cast<double>(n)) return {};
    return {{static_cast<std::size_t>(k), 1.0}};
  }
  double lo = std::floor(f);
  double t = f - lo;
  if (lo < 0 || lo >= static_cast<double>(n)) return {};
  auto i0 = static_cast<std::size_t>(lo);
  if (t == 0.0) return {{i0, 1.0}};
  if (i0 + 1 >= n) return {};
  return {{i0, 1.0 - t}, {i0 + 1, t}};
}

void check_overlap(const spatial_grid& src, const spatial_grid& dst) {
  bool x = src.origin_x < dst.origin_x + dst.extent_x() && dst.origin_x < src.origin_x + src.extent_x();
  bool y = src.origin_y < dst.origin_y + dst.extent_y() && dst.origin_y < src.origin_y + src.extent_y();
  if (!x || !y) throw geometry_error("source and target extents do not overlap");
}

// Resamples one layer. `get` returns nullopt for masked sources.
template <typename Get, typename Put, typename Mask>
void resample_layer(const spatial_grid& src, const spatial_grid& dst, spatial_method method, Get get, Put put,
                    Mask mask) {
  for (std::size_t r = 0; r < dst.rows; ++r) {
    auto ry = axis_taps(source_coord(dst.center_y(r), src.origin_y, src.cell_size_m), src.rows, method);
    for (std::size_t c = 0; c < dst.cols; ++c) {
      std::size_t cell = dst.cell_id(r, c);
      auto cx = axis_taps(source_coord(dst.center_x(c), src.origin_x, src.cell_size_m), src.cols, method);
      if (ry.empty() || cx.empty()) {
        mask(cell);
        continue;
      }
      double acc = 0.0, lo = INFINITY, hi = -INFINITY;
      bool ok = true;
      for (const auto& ty : ry) {
        for (const auto& tx : cx) {
          auto v = get(src.cell_id(ty.index, tx.index));
          if (!v) {
            ok = false;
            break;
          }
          acc += ty.weight * tx.weight * *v;
          lo = std::min(lo, *v);
          hi = std::max(hi, *v);
        }
        if (!ok) break;
      }
      if (!ok)
        mask(cell);
      else
        put(cell, std::clamp(acc, lo, hi));
    }
  }
}

template <typename Fn>
auto with_source(std::string_view source, Fn fn) -> decltype(fn()) {
  auto prefix = [&](const std::exception& e) { return std::string(source) + ": " + e.what(); };
  try {
    return fn();
  } catch (const extrapolation_error& e) {
    throw extrapolation_error(prefix(e));
  } catch (const geometry_error& e) {
    throw geometry_error(prefix(e));
  } catch (const data_error& e) {
    throw data_error(prefix(e));
  }
}

}  // namespace

data_cube resample_spatial(const data_cube& cube, const spatial_grid& target, spatial_method method) {
  target.validate();
  const auto& src = cube.grid().space;
  if (src == target) return cube;
  check_overlap(src, target);
  space_time_grid grid = cube.grid();
  grid.space = target;
  data_cube out(grid, cube.var());
  for (std::size_t t = 0; t < cube.n_epochs(); ++t) {
    resample_layer(
        src, target, method, [&](std::size_t cell) { return cube.get(cell, t); },
        [&](std::size_t cell, double v) { out.set(cell, t, v); }, [&](std::size_t cell) { out.mask(cell, t); });
  }
  return out;
}

texture_stack resample_texture(const texture_stack& texture, const spatial_grid& target, spatial_method method) {
  target.validate();
  const auto& src = texture.grid();
  if (src == target) return texture;
  check_overlap(src, target);
  texture_stack out(target);
  for (std::size_t l = 0; l < texture_stack::n_layers; ++l) {
    resample_layer(
        src, target, method,
        [&](std::size_t cell) -> std::optional<double> {
          if (!texture.defined(cell, l)) return std::nullopt;
          return texture.at(cell, l);
        },
        [&](std::size_t cell, double v) { out.set(cell, l, v); }, [&](std::size_t cell) { out.undefine(cell, l); });
  }
  return out;
}

data_cube resample_temporal(const data_cube& cube, std::span<const date> target, temporal_method method) {
  const auto& src = cube.grid().epochs;
  if (std::equal(src.begin(), src.end(), target.begin(), target.end())) return cube;
  if (target.empty()) throw data_error("no target epochs");
  for (auto d : target)
    if (d < src.front() || src.back() < d)
      throw extrapolation_error("target epoch " + d.iso() + " lies outside the source range " + src.front().iso() +
                                " .. " + src.back().iso());
  space_time_grid grid{cube.grid().space, std::vector<date>(target.begin(), target.end()), std::nullopt};
  data_cube out(grid, cube.var());

  for (std::size_t k = 0; k < target.size(); ++k) {
    auto it = std::upper_bound(src.begin(), src.end(), target[k]);
    std::size_t lo = static_cast<std::size_t>(it - src.begin()) - 1;
    bool exact = src[lo] == target[k];
    std::size_t hi = exact ? lo : lo + 1;
    double w = exact ? 0.0 : static_cast<double>(target[k] - src[lo]) / static_cast<double>(src[hi] - src[lo]);
    for (std::size_t cell = 0; cell < cube.n_cells(); ++cell) {
      if (exact) {
        if (auto v = cube.get(cell, lo))
          out.set(cell, k, *v);
        else
          out.mask(cell, k);
        continue;
      }
      if (method == temporal_method::nearest) {
        std::size_t pick = w <= 0.5 ? lo : hi;
        if (auto v = cube.get(cell, pick))
          out.set(cell, k, *v);
        else
          out.mask(cell, k);
        continue;
      }
      auto a = cube.get(cell, lo);
      auto b = cube.get(cell, hi);
      if (!a || !b)
        out.mask(cell, k);
      else
        out.set(cell, k, (1.0 - w) * *a + w * *b);
    }
  }
  return out;
}

aligned_bundle align_all(const data_cube& displacement, const data_cube& groundwater,
                         const data_cube& precipitation, const texture_stack& texture, const resample_spec& spec) {
  spec.target.validate();
  auto align = [&](const data_cube& cube, std::string_view name) {
    return with_source(name, [&] {
      data_cube s = resample_spatial(cube, spec.target.space, spec.spatial);
      return resample_temporal(s, spec.target.epochs, spec.temporal);
    });
  };
  aligned_bundle b{align(displacement, "displacement"), align(groundwater, "groundwater"),
                   align(precipitation, "precipitation"),
                   with_source("texture", [&] { return resample_texture(texture, spec.target.space, spec.spatial); }),
                   {}};
  const std::size_t n_cells = spec.target.space.cells(), n_epochs = spec.target.n_epochs();
  b.joint_mask.assign(n_cells * n_epochs, 0);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    bool tex = b.texture.cell_defined(cell);
    for (std::size_t t = 0; t < n_epochs; ++t)
      b.joint_mask[cell * n_epochs + t] =
          tex && b.displacement.valid(cell, t) && b.groundwater.valid(cell, t) && b.precipitation.valid(cell, t);
  }
  return b;
}

sample_table build_dataset(const aligned_bundle& bundle, const dataset_options& options) {
  const std::size_t n_epochs = bundle.displacement.n_epochs();
  if (options.expected_epochs && *options.expected_epochs != n_epochs)
    throw data_error("bundle has " + std::to_string(n_epochs) + " epochs but the declared feature length is " +
                     std::to_string(*options.expected_epochs));
  const std::size_t n_sources = options.include_forcing ? 3 : 1;
  const auto& g = bundle.displacement.grid().space;
  sample_table table(n_epochs * n_sources);
  std::vector<double> f(n_epochs * n_sources), t(texture_stack::n_layers);
  const data_cube* sources[] = {&bundle.displacement, &bundle.groundwater, &bundle.precipitation};
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      std::size_t cell = g.cell_id(r, c);
      bool ok = true;
      for (std::size_t e = 0; e < n_epochs && ok; ++e) ok = bundle.jointly_valid(cell, e);
      if (!ok) continue;
      for (std::size_t s = 0; s < n_sources; ++s)
        for (std::size_t e = 0; e < n_epochs; ++e) f[s * n_epochs + e] = sources[s]->at(cell, e);
      for (std::size_t l = 0; l < t.size(); ++l) t[l] = bundle.texture.at(cell, l);
      table.add_row(static_cast<long long>(cell), g.center_x(c), g.center_y(r), f, t);
    }
  }
  return table;
}

}  // namespace subsight::fuse
