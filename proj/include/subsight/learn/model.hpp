#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "subsight/gridstore.hpp"
#include "subsight/learn/forest.hpp"
#include "subsight/learn/net.hpp"
#include "subsight/learn/tree.hpp"

namespace subsight::learn {

enum class model_kind { tree, forest, net };

std::string_view kind_name(model_kind k);
model_kind parse_kind(std::string_view name);

struct model_spec {
  model_kind kind = model_kind::forest;
  tree_config tree;
  forest_config forest;
  net_config net;  // input_channels is taken from `channels`
  train_config train;
  // Number of time-series blocks in the feature vector.
  std::size_t channels = 1;

  void validate() const;
};

// The network sees per-channel standardized inputs and targets in [0,1];
// the wrapper converts at the boundary so every model speaks percent.
struct net_model {
  lstm_net net;
  std::vector<double> channel_mean;
  std::vector<double> channel_sd;
  train_config train;
  std::vector<double> loss_history;

  bool operator==(const net_model&) const = default;
};

struct fitted_model {
  model_kind kind = model_kind::forest;
  std::size_t n_features = 0;
  std::size_t n_targets = 0;
  std::size_t channels = 1;
  // Settings the model was fit with (tree and forest kinds).
  tree_config tree_settings;
  forest_config forest_settings;
  decision_tree tree;
  random_forest forest;
  net_model net;

  std::vector<double> predict(std::span<const double> x) const;
  // Row-major n x n_targets predictions for every row of the table.
  std::vector<double> predict_all(const sample_table& samples, int threads = 1) const;

  bool operator==(const fitted_model&) const = default;
};

fitted_model fit_model(const sample_table& samples, const model_spec& spec, std::uint64_t seed, int threads = 1);

// Versioned text format `SUBSIGHT-MODEL v1`: a header with the kind and
// shapes, a config block, then the fitted structure or flat parameters.
void write_model(const fitted_model& model, std::ostream& out);
void write_model(const fitted_model& model, const std::filesystem::path& path);
fitted_model read_model(std::istream& in);
fitted_model read_model(const std::filesystem::path& path);

}  // namespace subsight::learn
