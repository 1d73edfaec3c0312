#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "subsight/dates.hpp"

namespace subsight {

// Planar raster geometry. Cell (r, c) has its center at
// (origin_x + (c + 0.5) * cell_size_m, origin_y + (r + 0.5) * cell_size_m).
struct spatial_grid {
  std::size_t rows = 1;
  std::size_t cols = 1;
  double cell_size_m = 2000.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  std::size_t cells() const { return rows * cols; }
  std::size_t cell_id(std::size_t row, std::size_t col) const { return row * cols + col; }
  double center_x(std::size_t col) const { return origin_x + (static_cast<double>(col) + 0.5) * cell_size_m; }
  double center_y(std::size_t row) const { return origin_y + (static_cast<double>(row) + 0.5) * cell_size_m; }
  double extent_x() const { return static_cast<double>(cols) * cell_size_m; }
  double extent_y() const { return static_cast<double>(rows) * cell_size_m; }

  void validate() const;
  bool operator==(const spatial_grid&) const = default;
};

struct space_time_grid {
  spatial_grid space;
  std::vector<date> epochs;
  // When set, consecutive epochs must differ by exactly this many days.
  std::optional<int> epoch_spacing_days;

  std::size_t n_epochs() const { return epochs.size(); }
  void validate() const;

  // Geometry and dates only; the declared spacing is metadata.
  bool operator==(const space_time_grid& o) const { return space == o.space && epochs == o.epochs; }
};

// Regular epochs: `count` dates starting at `start`, `spacing_days` apart.
space_time_grid make_regular_grid(const spatial_grid& space, date start, std::size_t count,
                                  int spacing_days);

enum class variable { displacement_mm, groundwater_ft, precipitation_mm };

std::string_view variable_name(variable v);
variable parse_variable(std::string_view name);

// Masked cell x epoch values. Storage order is row -> col -> epoch.
class data_cube {
 public:
  data_cube(space_time_grid grid, variable var, double fill = 0.0);

  const space_time_grid& grid() const { return grid_; }
  variable var() const { return var_; }
  std::size_t n_cells() const { return grid_.space.cells(); }
  std::size_t n_epochs() const { return grid_.n_epochs(); }

  bool valid(std::size_t cell, std::size_t epoch) const { return mask_[index(cell, epoch)] != 0; }
  bool cell_fully_valid(std::size_t cell) const;
  std::size_t valid_count() const;

  // Throws masked_read_error on a masked entry.
  double at(std::size_t cell, std::size_t epoch) const;
  std::optional<double> get(std::size_t cell, std::size_t epoch) const;

  void set(std::size_t cell, std::size_t epoch, double value);
  void mask(std::size_t cell, std::size_t epoch);
  void mask_cell(std::size_t cell);

  bool operator==(const data_cube& o) const;

 private:
  std::size_t index(std::size_t cell, std::size_t epoch) const;

  space_time_grid grid_;
  variable var_;
  std::vector<double> values_;
  std::vector<unsigned char> mask_;
};

// Per-cell coarse-grain percent for each of the 10 model layers.
class texture_stack {
 public:
  static constexpr std::size_t n_layers = 10;

  // All values undefined until set.
  explicit texture_stack(spatial_grid grid);

  const spatial_grid& grid() const { return grid_; }
  std::size_t n_cells() const { return grid_.cells(); }

  bool defined(std::size_t cell, std::size_t layer) const { return defined_[layer * n_cells() + cell] != 0; }
  bool cell_defined(std::size_t cell) const;
  double at(std::size_t cell, std::size_t layer) const;
  // Layer average; throws if any layer is undefined.
  double mean_coarse(std::size_t cell) const;

  // Throws data_error when value is outside [0, 100].
  void set(std::size_t cell, std::size_t layer, double percent);
  void undefine(std::size_t cell, std::size_t layer);

  bool operator==(const texture_stack&) const = default;

 private:
  spatial_grid grid_;
  std::vector<double> values_;
  std::vector<unsigned char> defined_;
};

// One row per cell: feature history plus 10 target percents. Stored
// column-blocked so rows can be handed to learners as spans.
class sample_table {
 public:
  explicit sample_table(std::size_t n_features = 0, std::size_t n_targets = texture_stack::n_layers);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_targets() const { return n_targets_; }

  void add_row(long long cell_id, double x_m, double y_m, std::span<const double> features,
               std::span<const double> targets);

  long long cell_id(std::size_t i) const { return ids_[i]; }
  double x(std::size_t i) const { return xs_[i]; }
  double y(std::size_t i) const { return ys_[i]; }
  std::span<const double> features(std::size_t i) const {
    return {features_.data() + i * n_features_, n_features_};
  }
  std::span<const double> targets(std::size_t i) const {
    return {targets_.data() + i * n_targets_, n_targets_};
  }

  // Row-major n x n_features and n x n_targets blocks.
  std::span<const double> feature_matrix() const { return features_; }
  std::span<const double> target_matrix() const { return targets_; }

  sample_table subset(std::span<const std::size_t> rows) const;
  // Keeps feature columns whose flag is true.
  sample_table select_features(const std::vector<bool>& keep) const;
  // Sets feature columns whose flag is true to zero.
  sample_table zero_features(const std::vector<bool>& which) const;

  bool operator==(const sample_table&) const = default;

 private:
  std::size_t n_features_;
  std::size_t n_targets_;
  std::vector<long long> ids_;
  std::unordered_set<long long> id_set_;
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> features_;
  std::vector<double> targets_;
};

// Rows for cells valid at every epoch with all texture layers defined.
sample_table cube_to_samples(const data_cube& displacement, const texture_stack& texture);

void write_cube(const data_cube& cube, std::ostream& out);
void write_cube(const data_cube& cube, const std::filesystem::path& path);
data_cube read_cube(std::istream& in);
data_cube read_cube(const std::filesystem::path& path);

void write_texture(const texture_stack& tex, std::ostream& out);
void write_texture(const texture_stack& tex, const std::filesystem::path& path);
texture_stack read_texture(std::istream& in);
texture_stack read_texture(const std::filesystem::path& path);

void write_samples(const sample_table& table, std::ostream& out);
void write_samples(const sample_table& table, const std::filesystem::path& path);
sample_table read_samples(std::istream& in);
sample_table read_samples(const std::filesystem::path& path);

std::string samples_header(std::size_t n_features, std::size_t n_targets = texture_stack::n_layers);

}  // namespace subsight
