#include "subsight/learn/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "subsight/error.hpp"
#include "subsight/parallel.hpp"
#include "subsight/textio.hpp"

namespace subsight::learn {

std::string_view kind_name(model_kind k) {
  switch (k) {
    case model_kind::tree: return "tree";
    case model_kind::forest: return "forest";
    case model_kind::net: return "net";
  }
  return "forest";
}

model_kind parse_kind(std::string_view name) {
  if (name == "tree") return model_kind::tree;
  if (name == "forest") return model_kind::forest;
  if (name == "net") return model_kind::net;
  throw usage_error("unknown model '" + std::string(name) + "' (tree|forest|net)");
}

void model_spec::validate() const {
  if (channels < 1) throw usage_error("channels must be >= 1");
  switch (kind) {
    case model_kind::tree: tree.validate(); break;
    case model_kind::forest: forest.validate(); break;
    case model_kind::net:
      net.validate();
      train.validate();
      break;
  }
}

namespace {

std::vector<double> scaled_inputs(const sample_table& samples, const net_model& m, std::size_t channels) {
  const std::size_t nf = samples.n_features(), length = nf / channels;
  std::vector<double> out(samples.feature_matrix().begin(), samples.feature_matrix().end());
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < length; ++t) {
        double& v = out[i * nf + c * length + t];
        v = (v - m.channel_mean[c]) / m.channel_sd[c];
      }
  return out;
}

}  // namespace

std::vector<double> fitted_model::predict(std::span<const double> x) const {
  if (x.size() != n_features)
    throw data_error("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                     std::to_string(n_features));
  switch (kind) {
    case model_kind::tree: {
      auto p = tree.predict(x);
      return {p.begin(), p.end()};
    }
    case model_kind::forest: return forest.predict(x);
    case model_kind::net: {
      const std::size_t length = n_features / channels;
      std::vector<double> z(x.begin(), x.end());
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t t = 0; t < length; ++t) z[c * length + t] = (z[c * length + t] - net.channel_mean[c]) / net.channel_sd[c];
      auto out = net.net.forward(z, length);
      for (auto& v : out) v *= 100.0;
      return out;
    }
  }
  return {};
}

std::vector<double> fitted_model::predict_all(const sample_table& samples, int threads) const {
  if (samples.n_features() != n_features)
    throw data_error("samples have " + std::to_string(samples.n_features()) + " features, model expects " +
                     std::to_string(n_features));
  const std::size_t n = samples.size();
  if (kind == model_kind::net) {
    auto z = scaled_inputs(samples, net, channels);
    auto out = net.net.forward_all(z, n_features / channels, threads);
    for (auto& v : out) v *= 100.0;
    return out;
  }
  std::vector<double> out(n * n_targets);
  parallel_for(n, threads, [&](std::size_t i) {
    auto p = predict(samples.features(i));
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n_targets));
  });
  return out;
}

fitted_model fit_model(const sample_table& samples, const model_spec& spec, std::uint64_t seed, int threads) {
  spec.validate();
  if (samples.empty()) throw data_error("cannot fit a model on an empty sample set");
  fitted_model m;
  m.kind = spec.kind;
  m.n_features = samples.n_features();
  m.n_targets = samples.n_targets();
  m.channels = spec.channels;
  switch (spec.kind) {
    case model_kind::tree: {
      rng_stream rng(stream_key(seed, 0x7e));
      m.tree_settings = spec.tree;
      m.tree = fit_tree(samples, spec.tree, rng);
      break;
    }
    case model_kind::forest:
      m.forest_settings = spec.forest;
      m.forest = fit_forest(samples, spec.forest, seed, threads);
      break;
    case model_kind::net: {
      if (m.n_features % spec.channels != 0)
        throw data_error(std::to_string(m.n_features) + " features do not split into " +
                         std::to_string(spec.channels) + " channels");
      const std::size_t length = m.n_features / spec.channels;
      net_config cfg = spec.net;
      cfg.input_channels = spec.channels;
      cfg.outputs = m.n_targets;
      cfg.reduced_length(length);
      auto& nm = m.net;
      nm.train = spec.train;
      nm.channel_mean.assign(spec.channels, 0.0);
      nm.channel_sd.assign(spec.channels, 1.0);
      const double count = static_cast<double>(samples.size() * length);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i)
          for (std::size_t t = 0; t < length; ++t) s += samples.features(i)[c * length + t];
        double mean = s / count;
        for (std::size_t i = 0; i < samples.size(); ++i)
          for (std::size_t t = 0; t < length; ++t) {
            double d = samples.features(i)[c * length + t] - mean;
            ss += d * d;
          }
        double sd = std::sqrt(ss / count);
        nm.channel_mean[c] = mean;
        nm.channel_sd[c] = sd > 0.0 ? sd : 1.0;
      }
      rng_stream rng(stream_key(seed, 0x1a));
      nm.net = lstm_net::initialized(cfg, rng);
      auto inputs = scaled_inputs(samples, nm, spec.channels);
      std::vector<double> targets(samples.target_matrix().begin(), samples.target_matrix().end());
      for (auto& v : targets) v /= 100.0;
      sequence_batch batch{inputs, targets, length};
      nm.loss_history = train_net(nm.net, batch, spec.train, stream_key(seed, 0x2b), threads).loss_history;
      break;
    }
  }
  return m;
}

namespace {

using textio::format_real;

void write_reals(std::ostream& out, std::string_view key, std::span<const double> v) {
  out << key;
  for (double x : v) out << ' ' << format_real(x);
  out << '\n';
}

void write_tree_config(std::ostream& out, const tree_config& c) {
  out << "max_depth " << c.max_depth << '\n';
  out << "min_samples_leaf " << c.min_samples_leaf << '\n';
  out << "feature_subset " << c.features.str() << '\n';
}

void write_tree(std::ostream& out, const decision_tree& t) {
  out << "nodes " << t.nodes().size() << '\n';
  const std::size_t nt = t.n_targets();
  for (std::size_t k = 0; k < t.nodes().size(); ++k) {
    const auto& n = t.nodes()[k];
    if (n.feature >= 0) {
      out << "split " << n.feature << ' ' << format_real(n.threshold) << ' ' << n.left << ' ' << n.right << '\n';
    } else {
      out << "leaf";
      for (std::size_t j = 0; j < nt; ++j) out << ' ' << format_real(t.node_values()[k * nt + j]);
      out << '\n';
    }
  }
}

class model_reader {
 public:
  explicit model_reader(std::istream& in) : lines_(in) {}

  // Tokens after `key` on the next line.
  std::vector<std::string> expect(std::string_view key, std::size_t n_values) {
    auto v = expect_any(key);
    if (v.size() != n_values) fail("'" + std::string(key) + "' expects " + std::to_string(n_values) + " values");
    return v;
  }
  std::vector<std::string> expect_any(std::string_view key) {
    std::string line = lines_.expect(key);
    auto toks = textio::split_ws(line);
    if (toks.empty() || toks[0] != key) fail("expected '" + std::string(key) + "'");
    return {toks.begin() + 1, toks.end()};
  }
  std::vector<std::string> next_tokens() {
    std::string line = lines_.expect("model body");
    auto toks = textio::split_ws(line);
    return {toks.begin(), toks.end()};
  }
  std::size_t count(std::string_view key) { return to_count(expect(key, 1)[0]); }
  double real(std::string_view key) { return to_real(expect(key, 1)[0]); }
  std::string word(std::string_view key) { return expect(key, 1)[0]; }

  std::size_t to_count(const std::string& s) {
    long long v = 0;
    try {
      v = textio::parse_int(s);
    } catch (const parse_error&) {
      fail("bad integer '" + s + "'");
    }
    if (v < 0) fail("negative count '" + s + "'");
    return static_cast<std::size_t>(v);
  }
  long long to_int(const std::string& s) {
    try {
      return textio::parse_int(s);
    } catch (const parse_error&) {
      fail("bad integer '" + s + "'");
    }
    return 0;
  }
  double to_real(const std::string& s) {
    try {
      return textio::parse_real(s);
    } catch (const parse_error&) {
      fail("bad number '" + s + "'");
    }
    return 0.0;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw parse_error("model line " + std::to_string(lines_.line_no()) + ": " + what);
  }

 private:
  textio::line_reader lines_;
};

tree_config read_tree_config(model_reader& r) {
  tree_config c;
  c.max_depth = r.count("max_depth");
  c.min_samples_leaf = r.count("min_samples_leaf");
  try {
    c.features = feature_subset::parse(r.word("feature_subset"));
    c.validate();
  } catch (const usage_error& e) {
    r.fail(e.what());
  }
  return c;
}

decision_tree read_tree(model_reader& r, std::size_t nf, std::size_t nt) {
  const std::size_t n = r.count("nodes");
  if (n == 0) r.fail("tree without nodes");
  std::vector<tree_node> nodes(n);
  std::vector<double> values(n * nt, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    auto toks = r.next_tokens();
    if (!toks.empty() && toks[0] == "split" && toks.size() == 5) {
      nodes[k].feature = static_cast<std::int32_t>(r.to_int(toks[1]));
      nodes[k].threshold = r.to_real(toks[2]);
      nodes[k].left = static_cast<std::int32_t>(r.to_int(toks[3]));
      nodes[k].right = static_cast<std::int32_t>(r.to_int(toks[4]));
      if (nodes[k].feature < 0) r.fail("negative split feature");
    } else if (!toks.empty() && toks[0] == "leaf" && toks.size() == nt + 1) {
      for (std::size_t j = 0; j < nt; ++j) values[k * nt + j] = r.to_real(toks[j + 1]);
    } else {
      r.fail("expected a split or leaf line");
    }
  }
  try {
    return decision_tree(nf, nt, std::move(nodes), std::move(values));
  } catch (const data_error& e) {
    r.fail(e.what());
  }
}

}  // namespace

void write_model(const fitted_model& m, std::ostream& out) {
  out << "SUBSIGHT-MODEL v1\n";
  out << "kind " << kind_name(m.kind) << '\n';
  out << "features " << m.n_features << '\n';
  out << "targets " << m.n_targets << '\n';
  out << "channels " << m.channels << '\n';
  switch (m.kind) {
    case model_kind::tree:
      write_tree_config(out, m.tree_settings);
      write_tree(out, m.tree);
      break;
    case model_kind::forest:
      out << "n_trees " << m.forest.trees().size() << '\n';
      out << "bootstrap " << (m.forest_settings.bootstrap ? 1 : 0) << '\n';
      write_tree_config(out, m.forest_settings.tree);
      for (const auto& t : m.forest.trees()) write_tree(out, t);
      break;
    case model_kind::net: {
      const auto& c = m.net.net.config();
      for (std::size_t k = 0; k < 3; ++k)
        out << "conv" << k + 1 << ' ' << c.conv[k].channels << ' ' << c.conv[k].width << ' ' << c.conv[k].stride
            << '\n';
      out << "lstm";
      for (auto h : c.lstm) out << ' ' << h;
      out << '\n';
      out << "head " << head_name(c.head) << '\n';
      out << "init_scale " << format_real(c.init_scale) << '\n';
      const auto& t = m.net.train;
      out << "epochs " << t.epochs << '\n';
      out << "batch_size " << t.batch_size << '\n';
      out << "learning_rate " << format_real(t.learning_rate) << '\n';
      out << "momentum " << format_real(t.momentum) << '\n';
      out << "clip_norm " << format_real(t.clip_norm) << '\n';
      write_reals(out, "channel_mean", m.net.channel_mean);
      write_reals(out, "channel_sd", m.net.channel_sd);
      write_reals(out, "loss_history", m.net.loss_history);
      const auto& p = m.net.net.params();
      out << "params " << p.size() << '\n';
      for (std::size_t j = 0; j < p.size(); j += 8) {
        for (std::size_t k = j; k < std::min(j + 8, p.size()); ++k) out << (k > j ? " " : "") << format_real(p[k]);
        out << '\n';
      }
      break;
    }
  }
}

void write_model(const fitted_model& model, const std::filesystem::path& path) {
  auto out = textio::open_output(path);
  write_model(model, out);
  textio::finish_output(out, path);
}

fitted_model read_model(std::istream& in) {
  model_reader r(in);
  {
    auto toks = r.next_tokens();
    if (toks.size() != 2 || toks[0] != "SUBSIGHT-MODEL" || toks[1] != "v1") r.fail("malformed header");
  }
  fitted_model m;
  try {
    m.kind = parse_kind(r.word("kind"));
  } catch (const usage_error& e) {
    r.fail(e.what());
  }
  m.n_features = r.count("features");
  m.n_targets = r.count("targets");
  m.channels = r.count("channels");
  if (m.n_features == 0 || m.n_targets == 0 || m.channels == 0) r.fail("zero shape");
  switch (m.kind) {
    case model_kind::tree:
      m.tree_settings = read_tree_config(r);
      m.tree = read_tree(r, m.n_features, m.n_targets);
      break;
    case model_kind::forest: {
      const std::size_t n = r.count("n_trees");
      if (n == 0) r.fail("forest without trees");
      m.forest_settings.n_trees = n;
      {
        auto b = r.word("bootstrap");
        if (b != "0" && b != "1") r.fail("bootstrap must be 0 or 1");
        m.forest_settings.bootstrap = b == "1";
      }
      m.forest_settings.tree = read_tree_config(r);
      std::vector<decision_tree> trees;
      for (std::size_t k = 0; k < n; ++k) trees.push_back(read_tree(r, m.n_features, m.n_targets));
      m.forest = random_forest(std::move(trees));
      break;
    }
    case model_kind::net: {
      net_config c;
      c.input_channels = m.channels;
      c.outputs = m.n_targets;
      for (std::size_t k = 0; k < 3; ++k) {
        auto v = r.expect("conv" + std::to_string(k + 1), 3);
        c.conv[k] = {r.to_count(v[0]), r.to_count(v[1]), r.to_count(v[2])};
      }
      auto h = r.expect("lstm", 6);
      for (std::size_t l = 0; l < 6; ++l) c.lstm[l] = r.to_count(h[l]);
      auto& t = m.net.train;
      try {
        c.head = parse_head(r.word("head"));
        c.init_scale = r.real("init_scale");
        t.epochs = r.count("epochs");
        t.batch_size = r.count("batch_size");
        t.learning_rate = r.real("learning_rate");
        t.momentum = r.real("momentum");
        t.clip_norm = r.real("clip_norm");
        c.validate();
        t.validate();
      } catch (const usage_error& e) {
        r.fail(e.what());
      }
      auto reals = [&](std::string_view key, std::size_t n) {
        auto v = r.expect(key, n);
        std::vector<double> out;
        for (const auto& s : v) out.push_back(r.to_real(s));
        return out;
      };
      m.net.channel_mean = reals("channel_mean", m.channels);
      m.net.channel_sd = reals("channel_sd", m.channels);
      {
        auto v = r.expect_any("loss_history");
        for (const auto& s : v) m.net.loss_history.push_back(r.to_real(s));
      }
      m.net.net = lstm_net(c);
      auto& p = m.net.net.params();
      const std::size_t n = r.count("params");
      if (n != p.size()) r.fail("parameter count " + std::to_string(n) + " does not match the architecture (" + std::to_string(p.size()) + ")");
      std::size_t k = 0;
      while (k < n) {
        auto toks = r.next_tokens();
        if (toks.empty() || k + toks.size() > n) r.fail("parameter block has the wrong length");
        for (const auto& s : toks) p[k++] = r.to_real(s);
      }
      if (m.n_features % m.channels != 0) r.fail("features do not split into channels");
      break;
    }
  }
  std::string extra;
  while (std::getline(in, extra))
    if (!textio::trim(extra).empty()) r.fail("trailing content after the model");
  return m;
}

fitted_model read_model(const std::filesystem::path& path) {
  auto in = textio::open_input(path);
  return read_model(in);
}

}  // namespace subsight::learn
