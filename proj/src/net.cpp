#include "subsight/learn/net.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "subsight/error.hpp"
#include "subsight/parallel.hpp"

namespace subsight::learn {

namespace {

using mat = Eigen::MatrixXd;
using cmap = Eigen::Map<const mat>;
using vmap = Eigen::Map<mat>;

constexpr std::size_t chunk_size = 16;

mat sigmoid(const mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

std::string_view head_name(head_kind h) { return h == head_kind::softmax ? "softmax" : "scaled_sigmoid"; }

head_kind parse_head(std::string_view name) {
  if (name == "scaled_sigmoid") return head_kind::scaled_sigmoid;
  if (name == "softmax") return head_kind::softmax;
  throw usage_error("unknown head '" + std::string(name) + "' (scaled_sigmoid|softmax)");
}

void net_config::validate() const {
  if (input_channels < 1) throw usage_error("net input channels must be >= 1");
  if (outputs < 1) throw usage_error("net outputs must be >= 1");
  for (std::size_t k = 0; k < conv.size(); ++k) {
    const auto& c = conv[k];
    if (c.channels < 1 || c.width < 1 || c.stride < 1)
      throw usage_error("conv layer " + std::to_string(k + 1) + " needs channels, width and stride >= 1");
  }
  for (auto h : lstm)
    if (h < 1) throw usage_error("LSTM hidden widths must be >= 1");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw usage_error("init_scale must be finite and >= 0");
}

std::size_t net_config::receptive_field() const {
  std::size_t n = 1;
  for (auto it = conv.rbegin(); it != conv.rend(); ++it) n = (n - 1) * it->stride + it->width;
  return n;
}

std::size_t net_config::reduced_length(std::size_t length) const {
  if (length < receptive_field())
    throw data_error("sequence length " + std::to_string(length) + " is shorter than the receptive field " +
                     std::to_string(receptive_field()));
  for (const auto& c : conv) length = (length - c.width) / c.stride + 1;
  return length;
}

void train_config::validate() const {
  if (epochs < 1) throw usage_error("epochs must be >= 1");
  if (batch_size < 1) throw usage_error("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw usage_error("learning_rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw usage_error("momentum must be in [0, 1)");
  if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) throw usage_error("clip_norm must be finite and >= 0");
}

double loss_mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw data_error("loss needs equal-length non-empty vectors (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(target.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

struct lstm_net::trace {
  std::array<std::vector<mat>, 4> conv;  // conv[0] is the input, conv[k + 1] the output of layer k
  struct lstm_steps {
    std::vector<mat> i, f, o, g, c, tc, h;
  };
  std::array<lstm_steps, 6> lstm;
  mat out;
};

lstm_net::lstm_net(const net_config& config) : config_(config) {
  config_.validate();
  std::size_t off = 0;
  std::size_t in = config_.input_channels;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& c = config_.conv[k];
    layout_.conv_k[k] = off;
    off += c.channels * in * c.width;
    layout_.conv_b[k] = off;
    off += c.channels;
    in = c.channels;
  }
  for (std::size_t l = 0; l < 6; ++l) {
    std::size_t h = config_.lstm[l];
    layout_.lstm_w[l] = off;
    off += 4 * h * in;
    layout_.lstm_u[l] = off;
    off += 4 * h * h;
    layout_.lstm_b[l] = off;
    off += 4 * h;
    in = h;
  }
  layout_.fc_w = off;
  off += config_.outputs * in;
  layout_.fc_b = off;
  off += config_.outputs;
  layout_.total = off;
  params_.assign(off, 0.0);
}

lstm_net lstm_net::initialized(const net_config& config, rng_stream& rng) {
  lstm_net net(config);
  auto& p = net.params_;
  const auto& L = net.layout_;
  auto fill = [&](std::size_t begin, std::size_t count, double fan_in) {
    double a = config.init_scale / std::sqrt(fan_in);
    for (std::size_t k = 0; k < count; ++k) p[begin + k] = rng.uniform(-a, a);
  };
  std::size_t in = config.input_channels;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& c = config.conv[k];
    double fan = static_cast<double>(in * c.width);
    fill(L.conv_k[k], c.channels * in * c.width, fan);
    fill(L.conv_b[k], c.channels, fan);
    in = c.channels;
  }
  for (std::size_t l = 0; l < 6; ++l) {
    std::size_t h = config.lstm[l];
    double fan = static_cast<double>(in + h);
    fill(L.lstm_w[l], 4 * h * in, fan);
    fill(L.lstm_u[l], 4 * h * h, fan);
    fill(L.lstm_b[l], 4 * h, fan);
    for (std::size_t j = 0; j < h; ++j) p[L.lstm_b[l] + h + j] = 1.0;
    in = h;
  }
  fill(L.fc_w, config.outputs * in, static_cast<double>(in));
  fill(L.fc_b, config.outputs, static_cast<double>(in));
  return net;
}

void lstm_net::forward_batch(std::span<const double> inputs, std::size_t length, std::size_t count,
                             trace& tr) const {
  const auto& cfg = config_;
  const std::size_t steps = cfg.reduced_length(length);
  (void)steps;
  const std::size_t cin = cfg.input_channels;
  const std::size_t stride = cin * length;
  if (inputs.size() < count * stride) throw data_error("input block shorter than the batch");

  auto& x0 = tr.conv[0];
  x0.assign(length, mat(cin, count));
  for (std::size_t b = 0; b < count; ++b) {
    const double* s = inputs.data() + b * stride;
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t t = 0; t < length; ++t) x0[t](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b)) = s[c * length + t];
  }

  std::size_t in = cin;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& spec = cfg.conv[k];
    const auto cout = static_cast<Eigen::Index>(spec.channels);
    cmap K(params_.data() + layout_.conv_k[k], cout, static_cast<Eigen::Index>(in * spec.width));
    cmap bias(params_.data() + layout_.conv_b[k], cout, 1);
    const auto& src = tr.conv[k];
    std::size_t n_out = (src.size() - spec.width) / spec.stride + 1;
    auto& dst = tr.conv[k + 1];
    dst.assign(n_out, mat());
    for (std::size_t t = 0; t < n_out; ++t) {
      mat a = bias.replicate(1, static_cast<Eigen::Index>(count));
      for (std::size_t w = 0; w < spec.width; ++w)
        a.noalias() += K.middleCols(static_cast<Eigen::Index>(w * in), static_cast<Eigen::Index>(in)) *
                       src[t * spec.stride + w];
      dst[t] = a.array().tanh().matrix();
    }
    in = spec.channels;
  }

  const std::vector<mat>* xs = &tr.conv[3];
  for (std::size_t l = 0; l < 6; ++l) {
    const auto h = static_cast<Eigen::Index>(cfg.lstm[l]);
    cmap W(params_.data() + layout_.lstm_w[l], 4 * h, static_cast<Eigen::Index>(in));
    cmap U(params_.data() + layout_.lstm_u[l], 4 * h, h);
    cmap bias(params_.data() + layout_.lstm_b[l], 4 * h, 1);
    auto& st = tr.lstm[l];
    const std::size_t T = xs->size();
    for (auto* v : {&st.i, &st.f, &st.o, &st.g, &st.c, &st.tc, &st.h}) v->assign(T, mat());
    mat h_prev = mat::Zero(h, static_cast<Eigen::Index>(count));
    mat c_prev = h_prev;
    for (std::size_t t = 0; t < T; ++t) {
      mat z = bias.replicate(1, static_cast<Eigen::Index>(count));
      z.noalias() += W * (*xs)[t];
      z.noalias() += U * h_prev;
      st.i[t] = sigmoid(z.topRows(h));
      st.f[t] = sigmoid(z.middleRows(h, h));
      st.o[t] = sigmoid(z.middleRows(2 * h, h));
      st.g[t] = z.bottomRows(h).array().tanh().matrix();
      st.c[t] = (st.f[t].array() * c_prev.array() + st.i[t].array() * st.g[t].array()).matrix();
      st.tc[t] = st.c[t].array().tanh().matrix();
      st.h[t] = (st.o[t].array() * st.tc[t].array()).matrix();
      h_prev = st.h[t];
      c_prev = st.c[t];
    }
    xs = &st.h;
    in = cfg.lstm[l];
  }

  const auto nout = static_cast<Eigen::Index>(cfg.outputs);
  cmap Wf(params_.data() + layout_.fc_w, nout, static_cast<Eigen::Index>(in));
  cmap bf(params_.data() + layout_.fc_b, nout, 1);
  mat y = bf.replicate(1, static_cast<Eigen::Index>(count));
  y.noalias() += Wf * xs->back();
  if (cfg.head == head_kind::scaled_sigmoid) {
    tr.out = sigmoid(y);
  } else {
    Eigen::RowVectorXd m = y.colwise().maxCoeff();
    mat e = (y.rowwise() - m).array().exp().matrix();
    Eigen::RowVectorXd s = e.colwise().sum();
    tr.out = e.array().rowwise() / s.array();
  }
}

std::vector<double> lstm_net::forward(std::span<const double> sample, std::size_t length) const {
  if (sample.size() != config_.input_channels * length)
    throw data_error("sample length " + std::to_string(sample.size()) + " does not match " +
                     std::to_string(config_.input_channels) + " channels x " + std::to_string(length) + " steps");
  trace tr;
  forward_batch(sample, length, 1, tr);
  return {tr.out.data(), tr.out.data() + tr.out.size()};
}

std::vector<double> lstm_net::forward_all(std::span<const double> inputs, std::size_t length, int threads) const {
  const std::size_t stride = config_.input_channels * length;
  if (stride == 0 || inputs.size() % stride != 0) throw data_error("input block is not a whole number of samples");
  config_.reduced_length(length);
  const std::size_t n = inputs.size() / stride;
  std::vector<double> out(n * config_.outputs);
  const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
  parallel_for(chunks, threads, [&](std::size_t k) {
    std::size_t first = k * chunk_size, count = std::min(chunk_size, n - first);
    trace tr;
    forward_batch(inputs.subspan(first * stride, count * stride), length, count, tr);
    std::copy(tr.out.data(), tr.out.data() + tr.out.size(), out.begin() + static_cast<std::ptrdiff_t>(first * config_.outputs));
  });
  return out;
}

void lstm_net::accumulate_gradient(const sequence_batch& batch, std::size_t first, std::size_t count,
                                   std::span<double> grad, std::span<double> losses) const {
  const auto& cfg = config_;
  const std::size_t stride = cfg.input_channels * batch.length;
  const std::size_t nout = cfg.outputs;
  if (grad.size() != params_.size()) throw data_error("gradient buffer has the wrong size");
  if (batch.targets.size() < (first + count) * nout || batch.inputs.size() < (first + count) * stride)
    throw data_error("batch range out of bounds");
  trace tr;
  forward_batch(batch.inputs.subspan(first * stride, count * stride), batch.length, count, tr);
  const auto B = static_cast<Eigen::Index>(count);
  const auto NO = static_cast<Eigen::Index>(nout);

  cmap target(batch.targets.data() + first * nout, NO, B);
  mat diff = tr.out - target;
  for (std::size_t b = 0; b < count; ++b)
    losses[first + b] = diff.col(static_cast<Eigen::Index>(b)).squaredNorm() / static_cast<double>(nout);

  // Gradient of the summed per-sample loss.
  mat dout = diff * (2.0 / static_cast<double>(nout));
  mat dy;
  if (cfg.head == head_kind::scaled_sigmoid) {
    dy = (dout.array() * tr.out.array() * (1.0 - tr.out.array())).matrix();
  } else {
    Eigen::RowVectorXd dot = (dout.array() * tr.out.array()).colwise().sum();
    dy = (tr.out.array() * (dout.rowwise() - dot).array()).matrix();
  }

  const auto h_top = static_cast<Eigen::Index>(cfg.lstm[5]);
  cmap Wf(params_.data() + layout_.fc_w, NO, h_top);
  vmap(grad.data() + layout_.fc_w, NO, h_top).noalias() += dy * tr.lstm[5].h.back().transpose();
  vmap(grad.data() + layout_.fc_b, NO, 1) += dy.rowwise().sum();

  const std::size_t T = tr.lstm[5].h.size();
  std::vector<mat> dh_ext(T, mat::Zero(h_top, B));
  dh_ext.back() = Wf.transpose() * dy;

  for (std::size_t li = 6; li-- > 0;) {
    const auto h = static_cast<Eigen::Index>(cfg.lstm[li]);
    const std::vector<mat>& xs = li == 0 ? tr.conv[3] : tr.lstm[li - 1].h;
    const auto in = static_cast<Eigen::Index>(xs.front().rows());
    cmap W(params_.data() + layout_.lstm_w[li], 4 * h, in);
    cmap U(params_.data() + layout_.lstm_u[li], 4 * h, h);
    vmap dW(grad.data() + layout_.lstm_w[li], 4 * h, in);
    vmap dU(grad.data() + layout_.lstm_u[li], 4 * h, h);
    vmap db(grad.data() + layout_.lstm_b[li], 4 * h, 1);
    const auto& st = tr.lstm[li];
    std::vector<mat> dx(T);
    mat dh_next = mat::Zero(h, B), dc_next = mat::Zero(h, B);
    mat dz(4 * h, B);
    const mat zero = mat::Zero(h, B);
    for (std::size_t t = T; t-- > 0;) {
      const mat& c_prev = t > 0 ? st.c[t - 1] : zero;
      const mat& h_prev = t > 0 ? st.h[t - 1] : zero;
      mat dh = dh_ext[t] + dh_next;
      auto o = st.o[t].array(), i = st.i[t].array(), f = st.f[t].array(), g = st.g[t].array(),
           tc = st.tc[t].array();
      mat dc = (dh.array() * o * (1.0 - tc * tc) + dc_next.array()).matrix();
      dz.topRows(h) = (dc.array() * g * i * (1.0 - i)).matrix();
      dz.middleRows(h, h) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
      dz.middleRows(2 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dz.bottomRows(h) = (dc.array() * i * (1.0 - g * g)).matrix();
      dc_next = (dc.array() * f).matrix();
      dW.noalias() += dz * xs[t].transpose();
      dU.noalias() += dz * h_prev.transpose();
      db += dz.rowwise().sum();
      dx[t].noalias() = W.transpose() * dz;
      dh_next.noalias() = U.transpose() * dz;
    }
    dh_ext = std::move(dx);
  }

  // dh_ext now holds the gradient wrt the last conv layer's outputs.
  std::vector<mat> dact = std::move(dh_ext);
  for (std::size_t k = 3; k-- > 0;) {
    const auto& spec = cfg.conv[k];
    const auto& src = tr.conv[k];
    const auto& out = tr.conv[k + 1];
    const auto in = static_cast<Eigen::Index>(src.front().rows());
    const auto cout = static_cast<Eigen::Index>(spec.channels);
    cmap K(params_.data() + layout_.conv_k[k], cout, in * static_cast<Eigen::Index>(spec.width));
    vmap dK(grad.data() + layout_.conv_k[k], cout, in * static_cast<Eigen::Index>(spec.width));
    vmap db(grad.data() + layout_.conv_b[k], cout, 1);
    std::vector<mat> dsrc;
    if (k > 0) dsrc.assign(src.size(), mat::Zero(in, B));
    for (std::size_t t = 0; t < out.size(); ++t) {
      mat da = (dact[t].array() * (1.0 - out[t].array().square())).matrix();
      db += da.rowwise().sum();
      for (std::size_t w = 0; w < spec.width; ++w) {
        const auto col = static_cast<Eigen::Index>(w) * in;
        dK.middleCols(col, in).noalias() += da * src[t * spec.stride + w].transpose();
        if (k > 0) dsrc[t * spec.stride + w].noalias() += K.middleCols(col, in).transpose() * da;
      }
    }
    dact = std::move(dsrc);
  }
}

gradient_result net_gradient(const lstm_net& net, const sequence_batch& batch, int threads) {
  const std::size_t n = batch.size(net.config().input_channels);
  if (n == 0) throw data_error("empty batch");
  const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
  const std::size_t np = net.params().size();
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(np, 0.0));
  std::vector<double> losses(n);
  parallel_for(chunks, threads, [&](std::size_t k) {
    std::size_t first = k * chunk_size;
    net.accumulate_gradient(batch, first, std::min(chunk_size, n - first), partial[k], losses);
  });
  gradient_result r;
  r.gradient.assign(np, 0.0);
  for (const auto& p : partial)
    for (std::size_t j = 0; j < np; ++j) r.gradient[j] += p[j];
  for (auto& g : r.gradient) g /= static_cast<double>(n);
  for (double l : losses) r.loss += l;
  r.loss /= static_cast<double>(n);
  return r;
}

train_result train_net(lstm_net& net, const sequence_batch& data, const train_config& config, std::uint64_t seed,
                       int threads) {
  config.validate();
  const auto& cfg = net.config();
  const std::size_t n = data.size(cfg.input_channels);
  if (n == 0) throw data_error("cannot train on an empty sample set");
  if (data.targets.size() != n * cfg.outputs) throw data_error("target block does not match the sample count");
  cfg.reduced_length(data.length);
  const std::size_t stride = cfg.input_channels * data.length;
  const std::size_t np = net.params().size();

  std::vector<double> velocity(np, 0.0), grad(np), losses(n);
  std::vector<double> batch_in, batch_tg, batch_losses;
  std::vector<std::size_t> order(n);
  train_result result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_stream rng(stream_key(seed, 0x5e, epoch));
    shuffle(order, rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t bs = std::min(config.batch_size, n - start);
      batch_in.resize(bs * stride);
      batch_tg.resize(bs * cfg.outputs);
      for (std::size_t b = 0; b < bs; ++b) {
        std::size_t s = order[start + b];
        std::copy_n(data.inputs.begin() + static_cast<std::ptrdiff_t>(s * stride), stride,
                    batch_in.begin() + static_cast<std::ptrdiff_t>(b * stride));
        std::copy_n(data.targets.begin() + static_cast<std::ptrdiff_t>(s * cfg.outputs), cfg.outputs,
                    batch_tg.begin() + static_cast<std::ptrdiff_t>(b * cfg.outputs));
      }
      sequence_batch mb{batch_in, batch_tg, data.length};
      const std::size_t chunks = (bs + chunk_size - 1) / chunk_size;
      std::vector<std::vector<double>> partial(chunks, std::vector<double>(np, 0.0));
      batch_losses.assign(bs, 0.0);
      parallel_for(chunks, threads, [&](std::size_t k) {
        std::size_t first = k * chunk_size;
        net.accumulate_gradient(mb, first, std::min(chunk_size, bs - first), partial[k], batch_losses);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      for (const auto& p : partial)
        for (std::size_t j = 0; j < np; ++j) grad[j] += p[j];
      double sq = 0.0;
      for (auto& g : grad) {
        g /= static_cast<double>(bs);
        sq += g * g;
      }
      for (std::size_t b = 0; b < bs; ++b) {
        if (!std::isfinite(batch_losses[b]))
          throw divergence_error("training diverged in epoch " + std::to_string(epoch + 1) + " (non-finite loss)");
        losses[order[start + b]] = batch_losses[b];
      }
      if (!std::isfinite(sq))
        throw divergence_error("training diverged in epoch " + std::to_string(epoch + 1) + " (non-finite gradient)");
      double scale = 1.0;
      const double norm = std::sqrt(sq);
      if (config.clip_norm > 0.0 && norm > config.clip_norm) scale = config.clip_norm / norm;
      auto& p = net.params();
      for (std::size_t j = 0; j < np; ++j) {
        velocity[j] = config.momentum * velocity[j] - config.learning_rate * scale * grad[j];
        p[j] += velocity[j];
      }
    }
    double total = 0.0;
    for (double l : losses) total += l;
    total /= static_cast<double>(n);
    if (!std::isfinite(total))
      throw divergence_error("training diverged in epoch " + std::to_string(epoch + 1) + " (non-finite loss)");
    result.loss_history.push_back(total);
  }
  return result;
}

}  // namespace subsight::learn
