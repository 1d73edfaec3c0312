#pragma once

// Random instance generators shared by the unit and acceptance tests.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "subsight/gridstore.hpp"
#include "subsight/learn/model.hpp"
#include "subsight/random.hpp"
#include "subsight/sbas.hpp"

namespace subsight::testing {

// Values with awkward decimal expansions, occasional exact integers and
// extreme magnitudes.
inline double awkward_value(rng_stream& rng) {
  switch (rng.below(6)) {
    case 0: return static_cast<double>(static_cast<long long>(rng.below(2001)) - 1000);
    case 1: return rng.uniform(-1.0, 1.0) * 1e-300;
    case 2: return rng.uniform(-1.0, 1.0) * 1e300;
    case 3: return std::nextafter(rng.uniform(-50.0, 50.0), 1e9);
    default: return rng.normal() * std::pow(10.0, static_cast<double>(rng.below(12)) - 6.0);
  }
}

inline spatial_grid random_space(rng_stream& rng, std::size_t max_side = 5) {
  return {1 + rng.below(max_side), 1 + rng.below(max_side), rng.uniform(10.0, 5000.0), rng.uniform(-1e5, 1e5),
          rng.uniform(-1e5, 1e5)};
}

inline std::vector<date> random_dates(rng_stream& rng, std::size_t n) {
  std::vector<date> d;
  date cur = date::from_ymd(2014, 1, 1) + static_cast<int>(rng.below(2000));
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back(cur);
    cur = cur + 1 + static_cast<int>(rng.below(30));
  }
  return d;
}

inline data_cube random_cube(rng_stream& rng) {
  space_time_grid g{random_space(rng), random_dates(rng, 1 + rng.below(5)), std::nullopt};
  auto var = static_cast<variable>(rng.below(3));
  data_cube cube(g, var);
  for (std::size_t c = 0; c < cube.n_cells(); ++c)
    for (std::size_t e = 0; e < cube.n_epochs(); ++e) {
      if (rng.below(7) == 0)
        cube.mask(c, e);
      else
        cube.set(c, e, awkward_value(rng));
    }
  return cube;
}

inline texture_stack random_texture(rng_stream& rng) {
  texture_stack tex(random_space(rng));
  for (std::size_t c = 0; c < tex.n_cells(); ++c)
    for (std::size_t l = 0; l < texture_stack::n_layers; ++l) {
      if (rng.below(9) == 0) continue;
      double v = rng.below(5) == 0 ? static_cast<double>(rng.below(101)) : rng.uniform(0.0, 100.0);
      tex.set(c, l, v);
    }
  return tex;
}

inline sample_table random_samples(rng_stream& rng) {
  std::size_t nf = 1 + rng.below(12), nt = 1 + rng.below(10), n = rng.below(8);
  sample_table t(nf, nt);
  std::vector<double> f(nf), y(nt);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : f) v = awkward_value(rng);
    for (auto& v : y) v = rng.uniform(0.0, 100.0);
    t.add_row(static_cast<long long>(i * 7 + rng.below(7)), rng.uniform(-1e6, 1e6), rng.uniform(-1e6, 1e6), f, y);
  }
  return t;
}

inline sbas::interferogram_stack random_stack(rng_stream& rng) {
  std::size_t n = 2 + rng.below(5);
  sbas::acquisition_set acq{random_dates(rng, n), {}};
  for (std::size_t i = 0; i < n; ++i) acq.bperp_m.push_back(rng.uniform(-200.0, 200.0));
  int cap = 10 + static_cast<int>(rng.below(60));
  auto pairs = sbas::build_pairs(acq, cap);
  std::vector<double> pb;
  for (const auto& p : pairs) pb.push_back(acq.bperp_m[p.j] - acq.bperp_m[p.i] + rng.normal());
  sbas::interferogram_stack st(random_space(rng, 4), acq, pairs, cap, pb);
  for (std::size_t p = 0; p < st.n_pairs(); ++p)
    for (std::size_t c = 0; c < st.n_cells(); ++c) {
      if (rng.below(8) == 0)
        st.mask(p, c);
      else
        st.set(p, c, awkward_value(rng));
    }
  return st;
}

// Small fitted models of every kind, trained on a random table.
inline learn::fitted_model random_model(rng_stream& rng) {
  std::size_t channels = 1 + rng.below(2), length = 8 + rng.below(6), nt = 1 + rng.below(4);
  std::size_t n = 6 + rng.below(10);
  sample_table t(channels * length, nt);
  std::vector<double> f(channels * length), y(nt);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : f) v = rng.normal() * 10.0;
    for (auto& v : y) v = rng.uniform(0.0, 100.0);
    t.add_row(static_cast<long long>(i), rng.uniform(0.0, 1e4), rng.uniform(0.0, 1e4), f, y);
  }
  learn::model_spec spec;
  spec.kind = static_cast<learn::model_kind>(rng.below(3));
  spec.channels = channels;
  spec.tree.max_depth = 1 + rng.below(6);
  spec.forest.n_trees = 1 + rng.below(4);
  spec.forest.bootstrap = rng.below(2) == 0;
  spec.forest.tree.max_depth = 1 + rng.below(5);
  spec.net.outputs = nt;
  spec.net.conv = {{{1 + rng.below(3), 1 + rng.below(3), 1}, {1 + rng.below(3), 1 + rng.below(2), 1},
                    {1 + rng.below(3), 1, 1}}};
  for (auto& h : spec.net.lstm) h = 1 + rng.below(3);
  spec.net.head = rng.below(2) ? learn::head_kind::softmax : learn::head_kind::scaled_sigmoid;
  spec.train.epochs = 1 + rng.below(3);
  spec.train.batch_size = 1 + rng.below(8);
  spec.train.learning_rate = rng.uniform(0.01, 0.2);
  return learn::fit_model(t, spec, rng(), 1);
}

template <class T, class Writer>
std::string serialize(const T& value, Writer writer) {
  std::ostringstream out;
  writer(value, out);
  return out.str();
}

}  // namespace subsight::testing
