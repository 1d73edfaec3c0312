#include "subsight/raster.hpp"

#include <cmath>

#include "subsight/error.hpp"

namespace subsight::raster {

namespace {

std::vector<double> kernel_1d(double sigma, std::ptrdiff_t& radius) {
  radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (std::ptrdiff_t d = -radius; d <= radius; ++d)
    k[d + radius] = std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma));
  return k;
}

}  // namespace

std::vector<double> gaussian_lowpass(std::span<const double> field, std::span<const unsigned char> valid,
                                     const spatial_grid& grid, double sigma_cells) {
  if (field.size() != grid.cells() || (!valid.empty() && valid.size() != grid.cells()))
    throw data_error("field size does not match grid");
  if (sigma_cells < 0.0) throw data_error("sigma must be >= 0");
  std::vector<double> out(field.begin(), field.end());
  if (sigma_cells == 0.0) return out;
  std::ptrdiff_t radius = 0;
  auto k = kernel_1d(sigma_cells, radius);
  const auto rows = static_cast<std::ptrdiff_t>(grid.rows);
  const auto cols = static_cast<std::ptrdiff_t>(grid.cols);
  auto ok = [&](std::ptrdiff_t idx) { return valid.empty() || valid[idx] != 0; };
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      if (!ok(r * cols + c)) continue;
      double acc = 0.0, wsum = 0.0;
      for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr) {
        std::ptrdiff_t rr = r + dr;
        if (rr < 0 || rr >= rows) continue;
        for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
          std::ptrdiff_t cc = c + dc;
          if (cc < 0 || cc >= cols || !ok(rr * cols + cc)) continue;
          double w = k[dr + radius] * k[dc + radius];
          acc += w * field[rr * cols + cc];
          wsum += w;
        }
      }
      out[r * cols + c] = acc / wsum;
    }
  }
  return out;
}

std::vector<double> smooth_white_noise(std::span<const double> noise, const spatial_grid& grid,
                                       double sigma_cells) {
  if (noise.size() != grid.cells()) throw data_error("field size does not match grid");
  std::vector<double> out(noise.begin(), noise.end());
  if (sigma_cells <= 0.0) return out;
  std::ptrdiff_t radius = 0;
  auto k = kernel_1d(sigma_cells, radius);
  const auto rows = static_cast<std::ptrdiff_t>(grid.rows);
  const auto cols = static_cast<std::ptrdiff_t>(grid.cols);
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double acc = 0.0, w2 = 0.0;
      for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr) {
        std::ptrdiff_t rr = r + dr;
        if (rr < 0 || rr >= rows) continue;
        for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
          std::ptrdiff_t cc = c + dc;
          if (cc < 0 || cc >= cols) continue;
          double w = k[dr + radius] * k[dc + radius];
          acc += w * noise[rr * cols + cc];
          w2 += w * w;
        }
      }
      out[r * cols + c] = acc / std::sqrt(w2);
    }
  }
  return out;
}

}  // namespace subsight::raster
