#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "subsight/dates.hpp"
#include "subsight/gridstore.hpp"

namespace subsight::sbas {

struct acquisition_set {
  std::vector<date> dates;
  // Perpendicular baseline per acquisition, meters.
  std::vector<double> bperp_m;

  std::size_t size() const { return dates.size(); }
  void validate() const;
  bool operator==(const acquisition_set&) const = default;
};

struct epoch_pair {
  std::size_t i = 0;
  std::size_t j = 0;
  auto operator<=>(const epoch_pair&) const = default;
};

// Pairwise LOS-difference maps: observation(p, cell) = disp(j) - disp(i) + ...
class interferogram_stack {
 public:
  // pair_bperp_m is each interferogram's perpendicular baseline; when empty
  // it is derived as bperp(j) - bperp(i) from the acquisitions.
  interferogram_stack(spatial_grid space, acquisition_set acquisitions, std::vector<epoch_pair> pairs,
                      int max_baseline_days = 24, std::vector<double> pair_bperp_m = {});

  const spatial_grid& space() const { return space_; }
  const acquisition_set& acquisitions() const { return acq_; }
  const std::vector<epoch_pair>& pairs() const { return pairs_; }
  int max_baseline_days() const { return max_baseline_days_; }
  const std::vector<double>& pair_baselines() const { return pair_bperp_; }
  std::size_t n_pairs() const { return pairs_.size(); }
  std::size_t n_cells() const { return space_.cells(); }

  bool valid(std::size_t pair, std::size_t cell) const { return mask_[index(pair, cell)] != 0; }
  double at(std::size_t pair, std::size_t cell) const;
  std::optional<double> get(std::size_t pair, std::size_t cell) const;
  void set(std::size_t pair, std::size_t cell, double mm);
  void mask(std::size_t pair, std::size_t cell);

  bool operator==(const interferogram_stack&) const = default;

 private:
  std::size_t index(std::size_t pair, std::size_t cell) const;

  spatial_grid space_;
  acquisition_set acq_;
  std::vector<epoch_pair> pairs_;
  int max_baseline_days_;
  std::vector<double> pair_bperp_;
  std::vector<double> values_;
  std::vector<unsigned char> mask_;
};

void write_stack(const interferogram_stack& stack, std::ostream& out);
void write_stack(const interferogram_stack& stack, const std::filesystem::path& path);
interferogram_stack read_stack(std::istream& in);
interferogram_stack read_stack(const std::filesystem::path& path);

// bperp(j) - bperp(i) for every pair.
std::vector<double> pair_baselines(std::span<const epoch_pair> pairs, const acquisition_set& acquisitions);

// All (i, j), j > i, whose date gap is at most max_baseline_days, sorted.
std::vector<epoch_pair> build_pairs(const acquisition_set& acquisitions, int max_baseline_days = 24);

struct connectivity {
  bool connected = true;
  // Component label per epoch; labels are the smallest epoch index in the component.
  std::vector<std::size_t> component;
  std::size_t n_components = 0;
};

connectivity check_connectivity(std::span<const epoch_pair> pairs, std::size_t n_epochs);

// Unknowns are displacements at epochs 1..N-1 (epoch 0 is the reference)
// followed by an optional DEM-error coefficient in mm per meter of
// perpendicular baseline. The DEM column holds each pair's baseline. When
// those are exact differences of per-acquisition values the column lies in
// the span of the displacement columns, so the DEM term is only separable
// when pair baselines are not additive.
class design_matrix {
 public:
  // Throws connectivity_error for a disconnected network.
  design_matrix(std::span<const epoch_pair> pairs, const acquisition_set& acquisitions, bool estimate_dem);
  design_matrix(std::span<const epoch_pair> pairs, std::size_t n_epochs, std::span<const double> pair_bperp_m,
                bool estimate_dem);

  std::size_t rows() const { return static_cast<std::size_t>(a_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(a_.cols()); }
  std::size_t n_epochs() const { return n_epochs_; }
  bool has_dem_column() const { return estimate_dem_; }
  const Eigen::MatrixXd& dense() const { return a_; }

 private:
  Eigen::MatrixXd a_;
  std::size_t n_epochs_;
  bool estimate_dem_;
};

struct cell_solution {
  std::vector<double> series;  // epoch 0 first, always 0
  double dem_coeff = 0.0;
  double residual_rms = 0.0;
};

// Least-squares operator factored once and reused for every cell.
class least_squares_solver {
 public:
  // Throws rank_error when the design is rank deficient.
  explicit least_squares_solver(const design_matrix& design);

  cell_solution solve(std::span<const double> observations) const;

 private:
  Eigen::MatrixXd design_;
  Eigen::MatrixXd pinv_;
  std::size_t n_epochs_;
  bool has_dem_;
};

cell_solution invert_cell(std::span<const double> observations, const design_matrix& design);

// OLS slope of displacement against time, mm/year (365-day year).
double mean_velocity(std::span<const double> series, std::span<const date> dates);

struct inversion_options {
  bool estimate_dem = true;
  int threads = 1;
};

struct inversion_result {
  data_cube displacement;  // on the acquisition dates; masked where not connected
  std::vector<double> velocity_mm_per_year;
  std::vector<double> dem_coeff_mm_per_m;
  std::vector<double> residual_rms_mm;
  std::vector<unsigned char> connected;
};

// Per-cell inversion. Cells with masked pairs are solved on their valid
// pairs; cells whose valid network is disconnected or rank deficient are
// flagged and masked.
inversion_result invert_stack(const interferogram_stack& stack, const inversion_options& options = {});

void write_inversion_summary(const inversion_result& result, const std::filesystem::path& path);

// Troposphere suppression. The noise estimate is a spatial Gaussian
// low-pass of the temporal high-pass residual (series minus centered
// moving average); the output is input minus that estimate, shifted so each
// cell keeps its input value at epoch 0. window_epochs must be odd.
data_cube spatiotemporal_filter(const data_cube& cube, std::size_t window_epochs = 5, double sigma_cells = 2.0);

}  // namespace subsight::sbas
