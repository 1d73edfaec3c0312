#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "subsight/learn/tree.hpp"

namespace subsight::learn {

struct forest_config {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  tree_config tree{1000, 1, {feature_subset::kind::sqrt, 0}};

  void validate() const;
  bool operator==(const forest_config&) const = default;
};

class random_forest {
 public:
  random_forest() = default;
  explicit random_forest(std::vector<decision_tree> trees);

  const std::vector<decision_tree>& trees() const { return trees_; }
  std::size_t n_features() const { return trees_.empty() ? 0 : trees_.front().n_features(); }
  std::size_t n_targets() const { return trees_.empty() ? 0 : trees_.front().n_targets(); }

  // Per-target mean over trees, accumulated in tree order.
  std::vector<double> predict(std::span<const double> x) const;

  bool operator==(const random_forest&) const = default;

 private:
  std::vector<decision_tree> trees_;
};

// Tree t draws its bootstrap sample and feature subsets from its own
// stream, so the forest does not depend on the thread count.
random_forest fit_forest(const sample_table& samples, const forest_config& config, std::uint64_t seed,
                         int threads = 1);

}  // namespace subsight::learn
