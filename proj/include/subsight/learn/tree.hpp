#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subsight/gridstore.hpp"
#include "subsight/random.hpp"

namespace subsight::learn {

// Row-major feature/target blocks shared by the learners.
struct matrix_view {
  std::span<const double> features;  // n x n_features
  std::span<const double> targets;   // n x n_targets, may be empty for prediction
  std::size_t n_features = 0;
  std::size_t n_targets = 0;

  std::size_t rows() const { return n_features ? features.size() / n_features : 0; }
  double x(std::size_t row, std::size_t f) const { return features[row * n_features + f]; }
  double y(std::size_t row, std::size_t t) const { return targets[row * n_targets + t]; }

  static matrix_view of(const sample_table& table) {
    return {table.feature_matrix(), table.target_matrix(), table.n_features(), table.n_targets()};
  }
};

// How many features a node may consider.
struct feature_subset {
  enum class kind { all, sqrt, count };
  kind mode = kind::all;
  std::size_t count = 0;

  std::size_t resolve(std::size_t n_features) const;
  std::string str() const;
  static feature_subset parse(std::string_view text);
  bool operator==(const feature_subset&) const = default;
};

struct tree_config {
  std::size_t max_depth = 1000;
  std::size_t min_samples_leaf = 1;
  feature_subset features;

  void validate() const;
  bool operator==(const tree_config&) const = default;
};

struct tree_node {
  // -1 for leaves.
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool operator==(const tree_node&) const = default;
};

class decision_tree {
 public:
  decision_tree() = default;
  decision_tree(std::size_t n_features, std::size_t n_targets, std::vector<tree_node> nodes,
                std::vector<double> leaf_values);

  std::size_t n_features() const { return n_features_; }
  std::size_t n_targets() const { return n_targets_; }
  const std::vector<tree_node>& nodes() const { return nodes_; }
  // n_nodes x n_targets; only leaf rows are meaningful.
  const std::vector<double>& node_values() const { return values_; }
  std::size_t depth() const;
  std::size_t leaves() const;

  // x <= threshold goes left.
  std::span<const double> predict(std::span<const double> x) const;

  bool operator==(const decision_tree&) const = default;

 private:
  std::size_t n_features_ = 0;
  std::size_t n_targets_ = 0;
  std::vector<tree_node> nodes_;
  std::vector<double> values_;
};

struct split_choice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best variance-reduction split over `features` (evaluated in ascending
// index order) for the given rows. Candidate thresholds are midpoints of
// consecutive distinct values. A candidate replaces the incumbent only if
// its gain is larger by more than a relative tolerance, so ties go to the
// lowest feature index and then the lowest threshold.
std::optional<split_choice> best_split(const matrix_view& data, std::span<const std::size_t> rows,
                                       std::span<const std::size_t> features, std::size_t min_samples_leaf);

// Tolerance used when comparing gains: 1e-12 * max(1, node SSE).
double gain_tolerance(double node_sse);

// Rows may repeat (bootstrap). Row order does not affect the result.
decision_tree fit_tree(const matrix_view& data, std::span<const std::size_t> rows, const tree_config& config,
                       rng_stream& rng);
decision_tree fit_tree(const sample_table& samples, const tree_config& config, rng_stream& rng);

}  // namespace subsight::learn
