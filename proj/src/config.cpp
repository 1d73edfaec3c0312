#include "subsight/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "subsight/textio.hpp"

namespace subsight {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string s = "invalid configuration:";
  for (const auto& p : problems) s += "\n  " + p;
  return s;
}

using textio::format_real;

std::string fmt(double v) { return format_real(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

double real_value(std::string_view v) {
  double x = 0.0;
  try {
    x = textio::parse_real(v);
  } catch (const parse_error&) {
    throw usage_error("expected a number, got '" + std::string(v) + "'");
  }
  if (!std::isfinite(x)) throw usage_error("expected a finite number, got '" + std::string(v) + "'");
  return x;
}

long long int_value(std::string_view v) {
  try {
    return textio::parse_int(v);
  } catch (const parse_error&) {
    throw usage_error("expected an integer, got '" + std::string(v) + "'");
  }
}

std::uint64_t seed_value(std::string_view v) {
  try {
    return textio::parse_uint(v);
  } catch (const parse_error&) {
    throw usage_error("expected an unsigned integer, got '" + std::string(v) + "'");
  }
}

std::size_t count_value(std::string_view v, long long min) {
  long long x = int_value(v);
  if (x < min) throw usage_error("must be >= " + std::to_string(min) + " (got " + std::to_string(x) + ")");
  return static_cast<std::size_t>(x);
}

double positive(std::string_view v) {
  double x = real_value(v);
  if (!(x > 0.0)) throw usage_error("must be > 0 (got " + std::string(v) + ")");
  return x;
}

double nonnegative(std::string_view v) {
  double x = real_value(v);
  if (!(x >= 0.0)) throw usage_error("must be >= 0 (got " + std::string(v) + ")");
  return x;
}

double unit_interval(std::string_view v) {
  double x = real_value(v);
  if (!(x >= 0.0 && x <= 1.0)) throw usage_error("must lie in [0, 1] (got " + std::string(v) + ")");
  return x;
}

bool bool_value(std::string_view v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw usage_error("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::string_view> list_value(std::string_view v) {
  std::vector<std::string_view> out;
  for (auto part : textio::split(v, ',')) {
    auto t = textio::trim(part);
    if (t.empty()) throw usage_error("empty list element in '" + std::string(v) + "'");
    out.push_back(t);
  }
  return out;
}

template <typename T>
std::string join(const T& items, auto&& str) {
  std::string s;
  for (const auto& x : items) {
    if (!s.empty()) s += ",";
    s += str(x);
  }
  return s;
}

// Settings that only become part of run_config after every key is read.
struct draft {
  run_config cfg;
  date start = date::from_ymd(2015, 3, 1);
  std::size_t epochs = 132;
  int spacing = 14;
  std::vector<std::string> regions{"Chowchilla", "Helm"};
};

struct key_def {
  std::string name;
  std::function<void(draft&, std::string_view)> set;
  std::function<std::string(const run_config&)> get;
};

learn::conv_spec conv_value(std::string_view v) {
  auto parts = list_value(v);
  if (parts.size() != 3) throw usage_error("expected channels,width,stride");
  return {count_value(parts[0], 1), count_value(parts[1], 1), count_value(parts[2], 1)};
}

std::string conv_str(const learn::conv_spec& c) {
  return std::to_string(c.channels) + "," + std::to_string(c.width) + "," + std::to_string(c.stride);
}

const std::vector<key_def>& key_table() {
  static const std::vector<key_def> table = [] {
    std::vector<key_def> k;
    auto add = [&](std::string name, std::function<void(draft&, std::string_view)> set,
                   std::function<std::string(const run_config&)> get) {
      k.push_back({std::move(name), std::move(set), std::move(get)});
    };
    add("seed", [](draft& d, auto v) { d.cfg.seed = seed_value(v); },
        [](const run_config& c) { return std::to_string(c.seed); });

    // Grid and acquisitions.
    add("rows", [](draft& d, auto v) { d.cfg.scenario.grid.space.rows = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.scenario.grid.space.rows); });
    add("cols", [](draft& d, auto v) { d.cfg.scenario.grid.space.cols = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.scenario.grid.space.cols); });
    add("cell_size_m", [](draft& d, auto v) { d.cfg.scenario.grid.space.cell_size_m = positive(v); },
        [](const run_config& c) { return fmt(c.scenario.grid.space.cell_size_m); });
    add("origin_x", [](draft& d, auto v) { d.cfg.scenario.grid.space.origin_x = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.grid.space.origin_x); });
    add("origin_y", [](draft& d, auto v) { d.cfg.scenario.grid.space.origin_y = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.grid.space.origin_y); });
    add("start_date",
        [](draft& d, auto v) {
          try {
            d.start = date::parse(v);
          } catch (const parse_error&) {
            throw usage_error("expected a YYYY-MM-DD date, got '" + std::string(v) + "'");
          }
        },
        [](const run_config& c) { return c.scenario.grid.epochs.front().iso(); });
    add("epochs", [](draft& d, auto v) { d.epochs = count_value(v, 2); },
        [](const run_config& c) { return std::to_string(c.scenario.grid.n_epochs()); });
    add("epoch_spacing_days", [](draft& d, auto v) { d.spacing = static_cast<int>(count_value(v, 1)); },
        [](const run_config& c) {
          const auto& e = c.scenario.grid.epochs;
          return std::to_string(c.scenario.grid.epoch_spacing_days.value_or(e[1] - e[0]));
        });
    add("acquisition_spacing_days",
        [](draft& d, auto v) { d.cfg.scenario.acquisition_spacing_days = static_cast<int>(count_value(v, 1)); },
        [](const run_config& c) { return std::to_string(c.scenario.acquisition_spacing_days); });
    add("baseline_min_m", [](draft& d, auto v) { d.cfg.scenario.baseline_min_m = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.baseline_min_m); });
    add("baseline_max_m", [](draft& d, auto v) { d.cfg.scenario.baseline_max_m = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.baseline_max_m); });
    add("max_pair_days", [](draft& d, auto v) { d.cfg.scenario.max_pair_days = static_cast<int>(count_value(v, 1)); },
        [](const run_config& c) { return std::to_string(c.scenario.max_pair_days); });

    // Texture and regions.
    add("texture_cell_m", [](draft& d, auto v) { d.cfg.scenario.texture_cell_m = positive(v); },
        [](const run_config& c) { return fmt(c.scenario.texture_cell_m); });
    add("texture_smoothing_cells", [](draft& d, auto v) { d.cfg.scenario.texture_smoothing_cells = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.texture_smoothing_cells); });
    add("texture_cell_weight", [](draft& d, auto v) { d.cfg.scenario.texture_cell_weight = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.texture_cell_weight); });
    add("texture_profile_weight", [](draft& d, auto v) { d.cfg.scenario.texture_profile_weight = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.texture_profile_weight); });
    add("texture_layer_noise_weight",
        [](draft& d, auto v) { d.cfg.scenario.texture_layer_noise_weight = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.texture_layer_noise_weight); });
    add("active_cells", [](draft& d, auto v) { d.cfg.scenario.active_cells = count_value(v, 0); },
        [](const run_config& c) { return std::to_string(c.scenario.active_cells); });
    add("layout", [](draft& d, auto v) { d.cfg.scenario.layout = synthgen::parse_layout(v); },
        [](const run_config& c) { return std::string(synthgen::layout_name(c.scenario.layout)); });
    add("regions",
        [](draft& d, auto v) {
          d.regions.clear();
          for (auto n : list_value(v)) {
            if (!synthgen::builtin_preset(n)) throw usage_error("unknown region preset '" + std::string(n) + "'");
            d.regions.emplace_back(n);
          }
        },
        [](const run_config& c) { return join(c.scenario.regions, [](const auto& r) { return r.name; }); });

    // Forcing and compaction.
    add("elastic_mm_per_ft", [](draft& d, auto v) { d.cfg.scenario.compaction.elastic_coeff_mm_per_ft = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.compaction.elastic_coeff_mm_per_ft); });
    add("inelastic_mm_per_ft",
        [](draft& d, auto v) { d.cfg.scenario.compaction.inelastic_coeff_mm_per_ft = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.compaction.inelastic_coeff_mm_per_ft); });
    add("gw_seasonal_share", [](draft& d, auto v) { d.cfg.scenario.gw_seasonal_share = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.gw_seasonal_share); });
    add("gw_peak_doy", [](draft& d, auto v) { d.cfg.scenario.gw_peak_doy = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.gw_peak_doy); });
    add("gw_trend_ft_per_year", [](draft& d, auto v) { d.cfg.scenario.gw_trend_ft_per_year = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.gw_trend_ft_per_year); });
    add("gw_cell_jitter", [](draft& d, auto v) { d.cfg.scenario.gw_cell_jitter = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.gw_cell_jitter); });
    add("gw_months",
        [](draft& d, auto v) {
          d.cfg.scenario.gw_months.clear();
          if (v == "all") return;
          for (auto m : list_value(v)) {
            auto x = count_value(m, 1);
            if (x > 12) throw usage_error("months must lie in 1..12 (got " + std::to_string(x) + ")");
            d.cfg.scenario.gw_months.push_back(static_cast<unsigned>(x));
          }
        },
        [](const run_config& c) {
          if (c.scenario.gw_months.empty()) return std::string("all");
          return join(c.scenario.gw_months, [](unsigned m) { return std::to_string(m); });
        });
    add("precip_peak_doy", [](draft& d, auto v) { d.cfg.scenario.precip_peak_doy = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.precip_peak_doy); });
    add("precip_seasonal_amp", [](draft& d, auto v) { d.cfg.scenario.precip_seasonal_amp = unit_interval(v); },
        [](const run_config& c) { return fmt(c.scenario.precip_seasonal_amp); });

    // Observation noise.
    add("troposphere_sd_mm", [](draft& d, auto v) { d.cfg.scenario.troposphere_sd_mm = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.troposphere_sd_mm); });
    add("troposphere_sigma_cells", [](draft& d, auto v) { d.cfg.scenario.troposphere_sigma_cells = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.troposphere_sigma_cells); });
    add("measurement_sd_mm", [](draft& d, auto v) { d.cfg.scenario.measurement_sd_mm = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.measurement_sd_mm); });
    add("dem_coeff_min", [](draft& d, auto v) { d.cfg.scenario.dem_coeff_min = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.dem_coeff_min); });
    add("dem_coeff_max", [](draft& d, auto v) { d.cfg.scenario.dem_coeff_max = real_value(v); },
        [](const run_config& c) { return fmt(c.scenario.dem_coeff_max); });
    add("pair_baseline_jitter_m", [](draft& d, auto v) { d.cfg.scenario.pair_baseline_jitter_m = nonnegative(v); },
        [](const run_config& c) { return fmt(c.scenario.pair_baseline_jitter_m); });

    // Inversion.
    add("estimate_dem", [](draft& d, auto v) { d.cfg.estimate_dem = bool_value(v); },
        [](const run_config& c) { return fmt(c.estimate_dem); });
    add("filter", [](draft& d, auto v) { d.cfg.filter = bool_value(v); },
        [](const run_config& c) { return fmt(c.filter); });
    add("filter_window",
        [](draft& d, auto v) {
          auto w = count_value(v, 1);
          if (w % 2 == 0) throw usage_error("must be odd (got " + std::to_string(w) + ")");
          d.cfg.filter_window = w;
        },
        [](const run_config& c) { return std::to_string(c.filter_window); });
    add("filter_sigma_cells", [](draft& d, auto v) { d.cfg.filter_sigma_cells = nonnegative(v); },
        [](const run_config& c) { return fmt(c.filter_sigma_cells); });

    // Fusion.
    add("spatial_method", [](draft& d, auto v) { d.cfg.spatial = fuse::parse_spatial_method(v); },
        [](const run_config& c) { return std::string(fuse::method_name(c.spatial)); });
    add("temporal_method", [](draft& d, auto v) { d.cfg.temporal = fuse::parse_temporal_method(v); },
        [](const run_config& c) { return std::string(fuse::method_name(c.temporal)); });
    add("include_forcing", [](draft& d, auto v) { d.cfg.include_forcing = bool_value(v); },
        [](const run_config& c) { return fmt(c.include_forcing); });

    // Learners.
    add("model", [](draft& d, auto v) { d.cfg.model.kind = learn::parse_kind(v); },
        [](const run_config& c) { return std::string(learn::kind_name(c.model.kind)); });
    add("tree.max_depth", [](draft& d, auto v) { d.cfg.model.tree.max_depth = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.tree.max_depth); });
    add("tree.min_samples_leaf", [](draft& d, auto v) { d.cfg.model.tree.min_samples_leaf = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.tree.min_samples_leaf); });
    add("tree.feature_subset", [](draft& d, auto v) { d.cfg.model.tree.features = learn::feature_subset::parse(v); },
        [](const run_config& c) { return c.model.tree.features.str(); });
    add("forest.n_trees", [](draft& d, auto v) { d.cfg.model.forest.n_trees = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.forest.n_trees); });
    add("forest.bootstrap", [](draft& d, auto v) { d.cfg.model.forest.bootstrap = bool_value(v); },
        [](const run_config& c) { return fmt(c.model.forest.bootstrap); });
    add("forest.max_depth", [](draft& d, auto v) { d.cfg.model.forest.tree.max_depth = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.forest.tree.max_depth); });
    add("forest.min_samples_leaf",
        [](draft& d, auto v) { d.cfg.model.forest.tree.min_samples_leaf = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.forest.tree.min_samples_leaf); });
    add("forest.feature_subset",
        [](draft& d, auto v) { d.cfg.model.forest.tree.features = learn::feature_subset::parse(v); },
        [](const run_config& c) { return c.model.forest.tree.features.str(); });
    for (std::size_t i = 0; i < 3; ++i) {
      add("net.conv" + std::to_string(i + 1), [i](draft& d, auto v) { d.cfg.model.net.conv[i] = conv_value(v); },
          [i](const run_config& c) { return conv_str(c.model.net.conv[i]); });
    }
    add("net.lstm",
        [](draft& d, auto v) {
          auto parts = list_value(v);
          if (parts.size() != 6) throw usage_error("expected six hidden widths");
          for (std::size_t l = 0; l < 6; ++l) d.cfg.model.net.lstm[l] = count_value(parts[l], 1);
        },
        [](const run_config& c) { return join(c.model.net.lstm, [](std::size_t h) { return std::to_string(h); }); });
    add("net.head", [](draft& d, auto v) { d.cfg.model.net.head = learn::parse_head(v); },
        [](const run_config& c) { return std::string(learn::head_name(c.model.net.head)); });
    add("net.init_scale", [](draft& d, auto v) { d.cfg.model.net.init_scale = nonnegative(v); },
        [](const run_config& c) { return fmt(c.model.net.init_scale); });
    add("train.epochs", [](draft& d, auto v) { d.cfg.model.train.epochs = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.train.epochs); });
    add("train.batch_size", [](draft& d, auto v) { d.cfg.model.train.batch_size = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.model.train.batch_size); });
    add("train.learning_rate", [](draft& d, auto v) { d.cfg.model.train.learning_rate = nonnegative(v); },
        [](const run_config& c) { return fmt(c.model.train.learning_rate); });
    add("train.momentum",
        [](draft& d, auto v) {
          double m = real_value(v);
          if (!(m >= 0.0 && m < 1.0)) throw usage_error("must lie in [0, 1) (got " + std::string(v) + ")");
          d.cfg.model.train.momentum = m;
        },
        [](const run_config& c) { return fmt(c.model.train.momentum); });
    add("train.clip_norm", [](draft& d, auto v) { d.cfg.model.train.clip_norm = nonnegative(v); },
        [](const run_config& c) { return fmt(c.model.train.clip_norm); });

    // Evaluation.
    add("protocols",
        [](draft& d, auto v) {
          d.cfg.protocols.clear();
          for (auto p : list_value(v)) d.cfg.protocols.push_back(evalstat::protocol::parse(p));
        },
        [](const run_config& c) { return join(c.protocols, [](const auto& p) { return p.str(); }); });
    add("folds", [](draft& d, auto v) { d.cfg.folds = count_value(v, 2); },
        [](const run_config& c) { return std::to_string(c.folds); });
    add("ablation_mode", [](draft& d, auto v) { d.cfg.ablation = evalstat::parse_mode(v); },
        [](const run_config& c) { return std::string(evalstat::mode_name(c.ablation)); });
    add("alpha",
        [](draft& d, auto v) {
          double a = real_value(v);
          if (!(a > 0.0 && a < 1.0)) throw usage_error("must lie in (0, 1) (got " + std::string(v) + ")");
          d.cfg.alpha = a;
        },
        [](const run_config& c) { return fmt(c.alpha); });
    add("comparisons", [](draft& d, auto v) { d.cfg.comparisons = count_value(v, 1); },
        [](const run_config& c) { return std::to_string(c.comparisons); });
    return k;
  }();
  return table;
}

struct preset_field {
  std::string name;
  double synthgen::regime_preset::*member;
};

const std::vector<preset_field>& preset_fields() {
  using P = synthgen::regime_preset;
  static const std::vector<preset_field> f{
      {"displacement_mean_mm", &P::displacement_mean_mm}, {"displacement_sd_mm", &P::displacement_sd_mm},
      {"groundwater_mean_ft", &P::groundwater_mean_ft},   {"groundwater_sd_ft", &P::groundwater_sd_ft},
      {"rain_mean_mm", &P::rain_mean_mm},                 {"rain_sd_mm", &P::rain_sd_mm},
      {"coarse_mean_pct", &P::coarse_mean_pct},           {"coarse_sd_pct", &P::coarse_sd_pct},
  };
  return f;
}

struct entry {
  std::size_t line;
  std::string key;
  std::string value;
};

}  // namespace

config_error::config_error(std::vector<std::string> problems)
    : usage_error(join_problems(problems)), problems_(std::move(problems)) {}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

run_config parse_config(std::string_view text) {
  std::vector<std::string> problems;
  std::vector<entry> entries;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  textio::line_reader lines(in);
  std::string line;
  while (lines.next(line)) {
    auto hash = line.find('#');
    std::string_view body = textio::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    auto where = "line " + std::to_string(lines.line_no()) + ": ";
    auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back(where + "expected key = value");
      continue;
    }
    std::string key(textio::trim(body.substr(0, eq)));
    std::string value(textio::trim(body.substr(eq + 1)));
    if (key.empty()) {
      problems.push_back(where + "missing key before '='");
      continue;
    }
    if (!seen.insert(key).second) {
      problems.push_back(where + "key '" + key + "' given more than once");
      continue;
    }
    entries.push_back({lines.line_no(), key, value});
  }

  const auto& table = key_table();
  draft d;
  std::vector<entry> overrides;
  for (const auto& e : entries) {
    auto where = "line " + std::to_string(e.line) + ": " + e.key + ": ";
    if (e.key.starts_with("preset.")) {
      overrides.push_back(e);
      continue;
    }
    auto it = std::find_if(table.begin(), table.end(), [&](const key_def& k) { return k.name == e.key; });
    if (it == table.end()) {
      problems.push_back("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
      continue;
    }
    if (e.value.empty()) {
      problems.push_back(where + "missing value");
      continue;
    }
    try {
      it->set(d, e.value);
    } catch (const std::exception& ex) {
      problems.push_back(where + ex.what());
    }
  }

  auto& sc = d.cfg.scenario;
  sc.regions.clear();
  for (const auto& name : d.regions) sc.regions.push_back(*synthgen::builtin_preset(name));
  for (const auto& e : overrides) {
    auto where = "line " + std::to_string(e.line) + ": " + e.key + ": ";
    auto parts = textio::split(e.key, '.');
    if (parts.size() != 3) {
      problems.push_back(where + "expected preset.<Name>.<field>");
      continue;
    }
    auto region = std::find_if(sc.regions.begin(), sc.regions.end(), [&](const auto& r) { return r.name == parts[1]; });
    if (region == sc.regions.end()) {
      problems.push_back(where + "preset '" + std::string(parts[1]) + "' is not listed in regions");
      continue;
    }
    try {
      if (parts[2] == "layer_profile") {
        auto vals = list_value(e.value);
        if (vals.size() != texture_stack::n_layers) throw usage_error("expected 10 comma-separated values");
        std::array<double, texture_stack::n_layers> raw{};
        for (std::size_t l = 0; l < raw.size(); ++l) raw[l] = real_value(vals[l]);
        region->layer_profile = synthgen::normalize_profile(raw);
        continue;
      }
      auto field = std::find_if(preset_fields().begin(), preset_fields().end(),
                                [&](const preset_field& f) { return f.name == parts[2]; });
      if (field == preset_fields().end()) throw usage_error("unknown preset field '" + std::string(parts[2]) + "'");
      (*region).*(field->member) = real_value(e.value);
    } catch (const std::exception& ex) {
      problems.push_back(where + ex.what());
    }
  }

  // Cross-key checks only make sense once the individual values are sound.
  if (problems.empty()) {
    auto check = [&](auto&& fn) {
      try {
        fn();
      } catch (const std::exception& ex) {
        problems.push_back(ex.what());
      }
    };
    check([&] { sc.grid = make_regular_grid(sc.grid.space, d.start, d.epochs, d.spacing); });
    sc.seed = d.cfg.seed;
    check([&] { sc.validate(); });
    check([&] { d.cfg.model.tree.validate(); });
    check([&] { d.cfg.model.forest.validate(); });
    check([&] { d.cfg.model.net.validate(); });
    check([&] { d.cfg.model.train.validate(); });
    if (d.cfg.filter && d.cfg.filter_window > d.epochs)
      problems.push_back("filter_window exceeds the number of epochs");
  }
  if (!problems.empty()) throw config_error(std::move(problems));
  d.cfg.model.channels = d.cfg.include_forcing ? 3 : 1;
  return d.cfg;
}

run_config load_config(const std::filesystem::path& path) {
  std::ifstream in;
  try {
    in = textio::open_input(path);
  } catch (const std::exception& e) {
    throw usage_error(std::string("cannot read config: ") + e.what());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string normalized_config(const run_config& config) {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(config) + "\n";
  for (const auto& r : config.scenario.regions) {
    for (const auto& f : preset_fields()) out += "preset." + r.name + "." + f.name + " = " + fmt(r.*(f.member)) + "\n";
    out += "preset." + r.name + ".layer_profile = " +
           join(r.layer_profile, [](double v) { return fmt(v); }) + "\n";
  }
  return out;
}

}  // namespace subsight
