#include "subsight/learn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "subsight/error.hpp"
#include "subsight/textio.hpp"

namespace subsight::learn {

std::size_t feature_subset::resolve(std::size_t n_features) const {
  switch (mode) {
    case kind::all: return n_features;
    case kind::sqrt:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features)))));
    case kind::count: return std::min(count, n_features);
  }
  return n_features;
}

std::string feature_subset::str() const {
  switch (mode) {
    case kind::all: return "all";
    case kind::sqrt: return "sqrt";
    case kind::count: return std::to_string(count);
  }
  return "all";
}

feature_subset feature_subset::parse(std::string_view text) {
  if (text == "all") return {kind::all, 0};
  if (text == "sqrt") return {kind::sqrt, 0};
  long long n = 0;
  try {
    n = textio::parse_int(text);
  } catch (const parse_error&) {
    throw usage_error("feature subset must be all, sqrt, or a positive count (got '" + std::string(text) + "')");
  }
  if (n < 1) throw usage_error("feature subset count must be >= 1");
  return {kind::count, static_cast<std::size_t>(n)};
}

void tree_config::validate() const {
  if (max_depth < 1) throw usage_error("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw usage_error("min_samples_leaf must be >= 1");
  if (features.mode == feature_subset::kind::count && features.count < 1)
    throw usage_error("feature subset count must be >= 1");
}

decision_tree::decision_tree(std::size_t n_features, std::size_t n_targets, std::vector<tree_node> nodes,
                             std::vector<double> leaf_values)
    : n_features_(n_features), n_targets_(n_targets), nodes_(std::move(nodes)), values_(std::move(leaf_values)) {
  if (nodes_.empty() || values_.size() != nodes_.size() * n_targets_) throw data_error("malformed tree");
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& n = nodes_[k];
    if (n.feature < 0) continue;
    auto ok = [&](std::int32_t c) { return c > static_cast<std::int32_t>(k) && c < static_cast<std::int32_t>(nodes_.size()); };
    if (static_cast<std::size_t>(n.feature) >= n_features_ || !ok(n.left) || !ok(n.right))
      throw data_error("malformed tree node " + std::to_string(k));
  }
}

std::size_t decision_tree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    best = std::max(best, d[k]);
    if (nodes_[k].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes_[k].right)] = d[k] + 1;
    }
  }
  return best;
}

std::size_t decision_tree::leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const tree_node& n) { return n.feature < 0; }));
}

std::span<const double> decision_tree::predict(std::span<const double> x) const {
  if (x.size() != n_features_) throw data_error("feature vector length does not match the tree");
  std::size_t k = 0;
  while (nodes_[k].feature >= 0) {
    const auto& n = nodes_[k];
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return {values_.data() + k * n_targets_, n_targets_};
}

double gain_tolerance(double node_sse) { return 1e-12 * std::max(1.0, node_sse); }

std::optional<split_choice> best_split(const matrix_view& data, std::span<const std::size_t> rows,
                                       std::span<const std::size_t> features, std::size_t min_samples_leaf) {
  const std::size_t n = rows.size(), nt = data.n_targets;
  if (n < 2 || n < 2 * min_samples_leaf) return std::nullopt;

  std::vector<double> mean(nt, 0.0);
  for (auto r : rows)
    for (std::size_t t = 0; t < nt; ++t) mean[t] += data.y(r, t);
  for (auto& m : mean) m /= static_cast<double>(n);

  // Centered targets, stored by position within `rows`.
  std::vector<double> yc(n * nt);
  std::vector<double> s1_total(nt, 0.0), s2_total(nt, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < nt; ++t) {
      double v = data.y(rows[i], t) - mean[t];
      yc[i * nt + t] = v;
      s1_total[t] += v;
      s2_total[t] += v * v;
    }
  double sse_parent = 0.0;
  for (std::size_t t = 0; t < nt; ++t) sse_parent += s2_total[t] - s1_total[t] * s1_total[t] / static_cast<double>(n);
  const double tol = gain_tolerance(sse_parent);

  std::optional<split_choice> best;
  std::vector<std::pair<double, std::size_t>> order(n);
  std::vector<double> s1(nt), s2(nt);
  for (auto f : features) {
    for (std::size_t i = 0; i < n; ++i) order[i] = {data.x(rows[i], f), i};
    std::sort(order.begin(), order.end());
    if (order.front().first == order.back().first) continue;
    std::fill(s1.begin(), s1.end(), 0.0);
    std::fill(s2.begin(), s2.end(), 0.0);
    for (std::size_t m = 1; m < n; ++m) {
      const double* y = &yc[order[m - 1].second * nt];
      for (std::size_t t = 0; t < nt; ++t) {
        s1[t] += y[t];
        s2[t] += y[t] * y[t];
      }
      if (m < min_samples_leaf || n - m < min_samples_leaf) continue;
      const double a = order[m - 1].first, b = order[m].first;
      if (!(a < b)) continue;
      const double nl = static_cast<double>(m), nr = static_cast<double>(n - m);
      double sse = 0.0;
      for (std::size_t t = 0; t < nt; ++t) {
        double r1 = s1_total[t] - s1[t];
        sse += (s2[t] - s1[t] * s1[t] / nl) + ((s2_total[t] - s2[t]) - r1 * r1 / nr);
      }
      const double gain = sse_parent - sse;
      if (gain > (best ? best->gain : 0.0) + tol) {
        double mid = a + 0.5 * (b - a);
        if (!(mid < b)) mid = a;
        best = split_choice{f, mid, gain};
      }
    }
  }
  return best;
}

namespace {

struct pending {
  std::vector<std::size_t> rows;
  std::size_t depth;
  std::size_t node;
};

bool constant_in(const matrix_view& data, std::span<const std::size_t> rows, std::size_t f) {
  const double first = data.x(rows[0], f);
  for (auto r : rows)
    if (data.x(r, f) != first) return false;
  return true;
}

}  // namespace

decision_tree fit_tree(const matrix_view& data, std::span<const std::size_t> rows, const tree_config& config,
                       rng_stream& rng) {
  config.validate();
  if (rows.empty()) throw data_error("cannot fit a tree on an empty sample set");
  const std::size_t nf = data.n_features, nt = data.n_targets;
  const std::size_t k_features = config.features.resolve(nf);

  // Canonical row order makes fitting independent of input order.
  std::vector<std::size_t> root(rows.begin(), rows.end());
  std::stable_sort(root.begin(), root.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t f = 0; f < nf; ++f)
      if (data.x(a, f) != data.x(b, f)) return data.x(a, f) < data.x(b, f);
    for (std::size_t t = 0; t < nt; ++t)
      if (data.y(a, t) != data.y(b, t)) return data.y(a, t) < data.y(b, t);
    return false;
  });

  std::vector<tree_node> nodes(1);
  std::vector<double> values(nt, 0.0);
  std::vector<pending> stack;
  stack.push_back({std::move(root), 0, 0});
  std::vector<std::size_t> all_features(nf);
  std::iota(all_features.begin(), all_features.end(), std::size_t{0});
  std::vector<std::size_t> pool, chosen;

  while (!stack.empty()) {
    pending cur = std::move(stack.back());
    stack.pop_back();
    const std::size_t n = cur.rows.size();
    for (std::size_t t = 0; t < nt; ++t) {
      double s = 0.0;
      for (auto r : cur.rows) s += data.y(r, t);
      values[cur.node * nt + t] = s / static_cast<double>(n);
    }
    if (cur.depth >= config.max_depth || n < 2 * config.min_samples_leaf) continue;

    std::span<const std::size_t> candidates = all_features;
    if (k_features < nf) {
      // Draw features without replacement, skipping ones constant in this
      // node, until k non-constant features are found.
      pool = all_features;
      chosen.clear();
      std::size_t remaining = nf;
      while (remaining > 0 && chosen.size() < k_features) {
        auto j = static_cast<std::size_t>(rng.below(remaining));
        std::size_t f = pool[j];
        std::swap(pool[j], pool[remaining - 1]);
        --remaining;
        if (!constant_in(data, cur.rows, f)) chosen.push_back(f);
      }
      std::sort(chosen.begin(), chosen.end());
      candidates = chosen;
    }
    auto split = best_split(data, cur.rows, candidates, config.min_samples_leaf);
    if (!split) continue;

    std::vector<std::size_t> left, right;
    for (auto r : cur.rows) (data.x(r, split->feature) <= split->threshold ? left : right).push_back(r);
    const auto li = static_cast<std::int32_t>(nodes.size());
    nodes[cur.node].feature = static_cast<std::int32_t>(split->feature);
    nodes[cur.node].threshold = split->threshold;
    nodes[cur.node].left = li;
    nodes[cur.node].right = li + 1;
    nodes.resize(nodes.size() + 2);
    values.resize(nodes.size() * nt, 0.0);
    // Right pushed first so the left subtree is expanded first.
    stack.push_back({std::move(right), cur.depth + 1, static_cast<std::size_t>(li + 1)});
    stack.push_back({std::move(left), cur.depth + 1, static_cast<std::size_t>(li)});
  }
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (nodes[k].feature >= 0) std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(k * nt), nt, 0.0);
  return decision_tree(nf, nt, std::move(nodes), std::move(values));
}

decision_tree fit_tree(const sample_table& samples, const tree_config& config, rng_stream& rng) {
  if (samples.empty()) throw data_error("cannot fit a tree on an empty sample set");
  std::vector<std::size_t> rows(samples.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree(matrix_view::of(samples), rows, config, rng);
}

}  // namespace subsight::learn
