#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "subsight/random.hpp"

namespace subsight::learn {

enum class head_kind { scaled_sigmoid, softmax };

std::string_view head_name(head_kind h);
head_kind parse_head(std::string_view name);

struct conv_spec {
  std::size_t channels = 8;
  std::size_t width = 5;
  std::size_t stride = 1;

  bool operator==(const conv_spec&) const = default;
};

// Three temporal convolutions (tanh, valid padding), six stacked LSTM
// layers, one fully connected layer, then the output head.
struct net_config {
  std::size_t input_channels = 1;
  std::size_t outputs = 10;
  std::array<conv_spec, 3> conv{{{8, 5, 1}, {16, 5, 1}, {16, 3, 1}}};
  std::array<std::size_t, 6> lstm{32, 32, 32, 32, 32, 32};
  head_kind head = head_kind::scaled_sigmoid;
  double init_scale = 1.0;

  void validate() const;
  // Shortest input sequence that leaves at least one LSTM step.
  std::size_t receptive_field() const;
  // Sequence length reaching the LSTM stack; throws for short inputs.
  std::size_t reduced_length(std::size_t length) const;
  bool operator==(const net_config&) const = default;
};

struct train_config {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;

  void validate() const;
  bool operator==(const train_config&) const = default;
};

// Mean over components of the squared difference.
double loss_mse(std::span<const double> pred, std::span<const double> target);

// A batch of equal-length sequences. Each sample is channel-blocked:
// channel c at step t sits at offset c * length + t.
struct sequence_batch {
  std::span<const double> inputs;   // n x (channels * length)
  std::span<const double> targets;  // n x outputs, normalized units
  std::size_t length = 0;

  std::size_t size(std::size_t channels) const { return inputs.size() / (channels * length); }
};

class lstm_net {
 public:
  lstm_net() = default;
  // All parameters zero.
  explicit lstm_net(const net_config& config);

  // Uniform in +-init_scale / sqrt(fan_in); LSTM forget-gate biases start at 1.
  static lstm_net initialized(const net_config& config, rng_stream& rng);

  const net_config& config() const { return config_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::vector<double> forward(std::span<const double> sample, std::size_t length) const;
  // Outputs for every sample, n x outputs.
  std::vector<double> forward_all(std::span<const double> inputs, std::size_t length, int threads = 1) const;

  // Adds the gradient of the summed per-sample loss over samples [first,
  // first + count) into grad; writes each sample's loss into losses[i].
  void accumulate_gradient(const sequence_batch& batch, std::size_t first, std::size_t count,
                           std::span<double> grad, std::span<double> losses) const;

  bool operator==(const lstm_net&) const = default;

 private:
  struct layout {
    std::array<std::size_t, 3> conv_k{}, conv_b{};
    std::array<std::size_t, 6> lstm_w{}, lstm_u{}, lstm_b{};
    std::size_t fc_w = 0, fc_b = 0, total = 0;
    bool operator==(const layout&) const = default;
  };
  struct trace;

  void forward_batch(std::span<const double> inputs, std::size_t length, std::size_t count, trace& tr) const;

  net_config config_;
  layout layout_;
  std::vector<double> params_;
};

struct gradient_result {
  std::vector<double> gradient;  // of the mean loss
  double loss = 0.0;             // mean over samples
};

// Exact gradient of the mean MSE over the batch.
gradient_result net_gradient(const lstm_net& net, const sequence_batch& batch, int threads = 1);

struct train_result {
  std::vector<double> loss_history;  // mean training loss per epoch
};

// SGD with momentum over seeded shuffled mini-batches. Gradients are
// reduced over fixed 16-sample chunks in order, so results do not depend on
// the thread count.
train_result train_net(lstm_net& net, const sequence_batch& data, const train_config& config, std::uint64_t seed,
                       int threads = 1);

}  // namespace subsight::learn
