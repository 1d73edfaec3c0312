#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "subsight/gridstore.hpp"

namespace subsight::raster {

// Gaussian low-pass over a row-major field. Kernel radius is ceil(3 sigma);
// weights are renormalized over in-bounds valid cells. Invalid cells are
// neither read nor written (their output is copied from the input slot).
// sigma == 0 returns the input unchanged.
std::vector<double> gaussian_lowpass(std::span<const double> field, std::span<const unsigned char> valid,
                                     const spatial_grid& grid, double sigma_cells);

// Smooths white unit-variance noise while keeping unit variance per cell:
// out = sum(w z) / sqrt(sum(w^2)) over the in-bounds kernel.
std::vector<double> smooth_white_noise(std::span<const double> noise, const spatial_grid& grid,
                                       double sigma_cells);

}  // namespace subsight::raster
