#include "subsight/learn/forest.hpp"

#include <numeric>

#include "subsight/error.hpp"
#include "subsight/parallel.hpp"

namespace subsight::learn {

void forest_config::validate() const {
  if (n_trees < 1) throw usage_error("n_trees must be >= 1");
  tree.validate();
}

random_forest::random_forest(std::vector<decision_tree> trees) : trees_(std::move(trees)) {
  if (trees_.empty()) throw data_error("a forest needs at least one tree");
  for (const auto& t : trees_)
    if (t.n_features() != trees_.front().n_features() || t.n_targets() != trees_.front().n_targets())
      throw data_error("forest trees disagree on feature or target counts");
}

std::vector<double> random_forest::predict(std::span<const double> x) const {
  if (trees_.empty()) throw data_error("empty forest");
  std::vector<double> out(n_targets(), 0.0);
  for (const auto& t : trees_) {
    auto p = t.predict(x);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += p[k];
  }
  for (auto& v : out) v /= static_cast<double>(trees_.size());
  return out;
}

random_forest fit_forest(const sample_table& samples, const forest_config& config, std::uint64_t seed,
                         int threads) {
  config.validate();
  if (samples.empty()) throw data_error("cannot fit a forest on an empty sample set");
  const auto data = matrix_view::of(samples);
  const std::size_t n = samples.size();
  std::vector<decision_tree> trees(config.n_trees);
  parallel_for(config.n_trees, threads, [&](std::size_t t) {
    rng_stream rng(stream_key(seed, 0xf0, t));
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    trees[t] = fit_tree(data, rows, config.tree, rng);
  });
  return random_forest(std::move(trees));
}

}  // namespace subsight::learn
