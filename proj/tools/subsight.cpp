#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "subsight/config.hpp"
#include "subsight/evalstat.hpp"
#include "subsight/gridstore.hpp"
#include "subsight/learn/model.hpp"
#include "subsight/pipeline.hpp"
#include "subsight/sbas.hpp"
#include "subsight/synthgen.hpp"
#include "subsight/textio.hpp"

namespace fs = std::filesystem;
using namespace subsight;

namespace {

struct options {
  std::string subcommand;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out = ".";
  std::vector<std::string> in;
  std::vector<std::string> models;
  std::vector<std::string> protocols;
  std::string months = "all";
};

class run_context {
 public:
  explicit run_context(const options& opt) : opt_(opt), out_(opt.out) {
    for (const auto& d : opt.in) in_.emplace_back(d);
    if (in_.empty()) in_.push_back(out_);
    fs::create_directories(out_);
    config_source_ = opt.config_path;
    if (config_source_.empty()) {
      for (const auto& d : in_)
        if (fs::exists(d / "config.cfg")) {
          config_source_ = (d / "config.cfg").string();
          break;
        }
    }
    config_ = config_source_.empty() ? parse_config("") : load_config(config_source_);
    if (opt.seed) {
      config_.seed = *opt.seed;
      config_.scenario.seed = *opt.seed;
    }
  }

  const run_config& config() const { return config_; }
  run_config& config() { return config_; }
  int threads() const { return opt_.threads; }

  fs::path input(const std::string& name) {
    for (const auto& d : in_) {
      auto p = d / name;
      if (fs::exists(p)) {
        inputs_.push_back(p.string());
        return p;
      }
    }
    throw data_error("missing input file '" + name + "' (searched the --in directories)");
  }

  std::optional<fs::path> optional_input(const std::string& name) {
    for (const auto& d : in_)
      if (fs::exists(d / name)) return input(name);
    return std::nullopt;
  }

  fs::path output(const std::string& name) {
    auto p = out_ / name;
    outputs_.push_back(p.string());
    return p;
  }

  template <class Writer>
  void write(const std::string& name, Writer&& writer) {
    auto path = output(name);
    auto out = textio::open_output(path);
    writer(out);
    textio::finish_output(out, path);
  }

  // Threads are left out so runs differing only in --threads leave the
  // same manifest apart from the wall time.
  void write_manifest(double wall_seconds) {
    std::ostringstream cmd;
    cmd << "subsight " << opt_.subcommand;
    if (!opt_.config_path.empty()) cmd << " --config " << opt_.config_path;
    if (opt_.seed) cmd << " --seed " << *opt_.seed;
    cmd << " --out " << opt_.out;
    for (const auto& d : opt_.in) cmd << " --in " << d;
    for (const auto& m : opt_.models) cmd << " --model " << m;
    for (const auto& p : opt_.protocols) cmd << " --protocol " << p;
    if (opt_.subcommand == "ablate") cmd << " --months " << opt_.months;

    auto path = out_ / ("manifest_" + opt_.subcommand + ".txt");
    auto out = textio::open_output(path);
    out << "subcommand: " << opt_.subcommand << '\n';
    out << "version: " << SUBSIGHT_VERSION << '\n';
    out << "command: " << cmd.str() << '\n';
    out << "config: " << (config_source_.empty() ? "(defaults)" : config_source_) << '\n';
    out << "seed: " << config_.seed << '\n';
    for (const auto& p : inputs_) out << "input: " << p << '\n';
    for (const auto& p : outputs_) out << "output: " << p << '\n';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", wall_seconds);
    out << "wall_time_s: " << buf << '\n';
    out << "# effective configuration\n" << normalized_config(config_);
    textio::finish_output(out, path);
  }

 private:
  const options& opt_;
  fs::path out_;
  std::vector<fs::path> in_;
  std::string config_source_;
  run_config config_;
  std::vector<std::string> inputs_, outputs_;
};

void log(const std::string& msg) { std::cerr << "subsight: " << msg << '\n'; }

std::vector<learn::model_spec> chosen_models(const options& opt, const run_config& cfg) {
  if (opt.models.empty()) return {cfg.model};
  std::vector<learn::model_spec> out;
  for (const auto& m : opt.models) {
    auto spec = cfg.model;
    spec.kind = learn::parse_kind(m);
    out.push_back(spec);
  }
  return out;
}

std::vector<evalstat::protocol> chosen_protocols(const options& opt, const run_config& cfg) {
  if (opt.protocols.empty()) return cfg.protocols;
  std::vector<evalstat::protocol> out;
  for (const auto& p : opt.protocols) {
    auto proto = evalstat::protocol::parse(p);
    proto.validate();
    out.push_back(proto);
  }
  return out;
}

std::vector<unsigned> parse_months(std::string_view text) {
  std::vector<unsigned> months;
  if (textio::trim(text) == "all") {
    for (unsigned m = 1; m <= 12; ++m) months.push_back(m);
    return months;
  }
  for (auto tok : textio::split(text, ',')) {
    long long m = 0;
    try {
      m = textio::parse_int(textio::trim(tok));
    } catch (const parse_error&) {
      throw usage_error("--months expects 'all' or a comma list of 1..12");
    }
    if (m < 1 || m > 12) throw usage_error("--months values must be in 1..12");
    months.push_back(static_cast<unsigned>(m));
  }
  if (months.empty()) throw usage_error("--months is empty");
  return months;
}

std::string file_tag(const evalstat::report_row& row, std::size_t index) {
  std::string tag = row.protocol;
  std::replace(tag.begin(), tag.end(), ':', '-');
  char idx[24];
  std::snprintf(idx, sizeof idx, "%02zu", index + 1);
  return std::string(idx) + "_" + row.model + "_" + tag;
}

// ------------------------------------------------------------- subcommands

void cmd_simulate(run_context& ctx) {
  const auto& cfg = ctx.config();
  log("simulating scenario (seed " + std::to_string(cfg.seed) + ")");
  auto sc = synthgen::run_scenario(cfg.scenario);
  write_texture(sc.texture, ctx.output("texture.tex"));
  write_cube(sc.drivers.groundwater, ctx.output("groundwater.cube"));
  write_cube(sc.drivers.precipitation, ctx.output("precipitation.cube"));
  write_cube(sc.displacement, ctx.output("truth_displacement.cube"));
  sbas::write_stack(sc.stack, ctx.output("stack.stk"));
  ctx.write("truth_dem.csv", [&](std::ostream& out) {
    out << "cell_id,dem_coeff_mm_per_m\n";
    for (std::size_t c = 0; c < sc.dem_coeff_mm_per_m.size(); ++c)
      out << c << ',' << textio::format_real(sc.dem_coeff_mm_per_m[c]) << '\n';
  });
  ctx.write("config.cfg", [&](std::ostream& out) { out << normalized_config(cfg); });
}

void cmd_invert(run_context& ctx) {
  auto stack = sbas::read_stack(ctx.input("stack.stk"));
  log("inverting " + std::to_string(stack.n_pairs()) + " interferograms over " + std::to_string(stack.n_cells()) +
      " cells");
  auto inv = pipeline::invert(stack, ctx.config(), ctx.threads());
  write_cube(inv.raw.displacement, ctx.output("raw_displacement.cube"));
  write_cube(inv.displacement, ctx.output("displacement.cube"));
  sbas::write_inversion_summary(inv.raw, ctx.output("inversion.csv"));
}

void cmd_fuse(run_context& ctx) {
  auto disp = read_cube(ctx.input("displacement.cube"));
  auto gw = read_cube(ctx.input("groundwater.cube"));
  auto precip = read_cube(ctx.input("precipitation.cube"));
  auto tex = read_texture(ctx.input("texture.tex"));
  log("aligning sources onto the canonical grid");
  auto bundle = pipeline::align(disp, gw, precip, tex, ctx.config());
  write_cube(bundle.displacement, ctx.output("aligned_displacement.cube"));
  write_cube(bundle.groundwater, ctx.output("aligned_groundwater.cube"));
  write_cube(bundle.precipitation, ctx.output("aligned_precipitation.cube"));
  write_texture(bundle.texture, ctx.output("aligned_texture.tex"));
  auto samples = pipeline::dataset(bundle, ctx.config());
  log(std::to_string(samples.size()) + " samples with " + std::to_string(samples.n_features()) + " features");
  write_samples(samples, ctx.output("samples.csv"));
}

void cmd_train(run_context& ctx, const options& opt) {
  auto samples = read_samples(ctx.input("samples.csv"));
  for (const auto& spec : chosen_models(opt, ctx.config())) {
    std::string name(learn::kind_name(spec.kind));
    log("training " + name + " on " + std::to_string(samples.size()) + " samples");
    auto model = learn::fit_model(samples, spec, ctx.config().seed, ctx.threads());
    learn::write_model(model, ctx.output(name + ".model"));
  }
}

void cmd_eval(run_context& ctx, const options& opt) {
  auto samples = read_samples(ctx.input("samples.csv"));
  const auto& cfg = ctx.config();
  std::vector<evalstat::report_row> rows;
  std::size_t index = 0;
  const auto specs = chosen_models(opt, cfg);
  const auto protocols = chosen_protocols(opt, cfg);
  for (const auto& spec : specs) {
    for (const auto& proto : protocols) {
      log("evaluating " + std::string(learn::kind_name(spec.kind)) + " with " + proto.str());
      auto ev = evalstat::evaluate(samples, proto, spec, cfg.seed, cfg.scenario.grid.epochs, ctx.threads());
      const std::size_t nt = samples.n_targets();
      ctx.write("predictions_" + file_tag(ev.row, index) + ".csv", [&](std::ostream& out) {
        out << "row,layer,truth_pct,predicted_pct\n";
        for (std::size_t k = 0; k < ev.truth.size(); ++k)
          out << k / nt << ',' << k % nt + 1 << ',' << textio::format_real(ev.truth[k]) << ','
              << textio::format_real(ev.predicted[k]) << '\n';
      });
      rows.push_back(ev.row);
      ++index;
    }
  }
  ctx.write("report.csv", [&](std::ostream& out) { evalstat::write_report_csv(rows, out); });
}

void cmd_ablate(run_context& ctx, const options& opt) {
  auto samples = read_samples(ctx.input("samples.csv"));
  if (opt.models.size() > 1) throw usage_error("ablate takes a single --model");
  auto spec = chosen_models(opt, ctx.config()).front();
  const auto& cfg = ctx.config();
  auto months = parse_months(opt.months);
  evalstat::ablation_options ao;
  ao.folds = cfg.folds;
  ao.mode = cfg.ablation;
  ao.alpha = cfg.alpha;
  ao.n_comparisons = cfg.comparisons;
  ao.threads = ctx.threads();
  log("ablating " + std::to_string(months.size()) + " months with " + std::string(learn::kind_name(spec.kind)));
  auto table = evalstat::month_ablation(samples, cfg.scenario.grid.epochs, months, spec, cfg.seed, ao);
  ctx.write("ablation.csv", [&](std::ostream& out) { evalstat::write_ablation_csv(table, out); });
}

std::vector<std::pair<double, double>> read_predictions(const fs::path& path) {
  auto in = textio::open_input(path);
  textio::line_reader lines(in);
  lines.expect("predictions header");
  std::vector<std::pair<double, double>> out;
  std::string line;
  while (lines.next(line)) {
    auto f = textio::split(line, ',');
    if (f.size() != 4) throw parse_error(path.string() + ": expected 4 fields per row");
    out.emplace_back(textio::parse_real(f[2]), textio::parse_real(f[3]));
  }
  return out;
}

void cmd_report(run_context& ctx) {
  std::vector<evalstat::report_row> rows;
  {
    auto in = textio::open_input(ctx.input("report.csv"));
    rows = evalstat::read_report_csv(in);
  }
  std::ostringstream summary;
  summary << "Evaluation summary\n\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    char line[256];
    std::snprintf(line, sizeof line, "%-8s %-18s R = %.4f  train %zu  test %zu  seed %llu", r.model.c_str(),
                  r.protocol.c_str(), r.r, r.n_train, r.n_test, static_cast<unsigned long long>(r.seed));
    summary << line;
    if (r.p_value) summary << "  p = " << textio::format_real(*r.p_value);
    summary << '\n';

    std::string tag = file_tag(r, i);
    auto pred_path = ctx.optional_input("predictions_" + tag + ".csv");
    if (!pred_path) continue;
    auto pairs = read_predictions(*pred_path);
    std::vector<double> truth, pred;
    for (auto [t, p] : pairs) {
      truth.push_back(t);
      pred.push_back(p);
    }
    char title[160];
    std::snprintf(title, sizeof title, "%s %s  R=%.3f (seed %llu)", r.model.c_str(), r.protocol.c_str(), r.r,
                  static_cast<unsigned long long>(r.seed));
    ctx.write("scatter_" + tag + ".svg", [&](std::ostream& out) { evalstat::write_scatter_svg(truth, pred, title, out); });
  }

  if (auto ab = ctx.optional_input("ablation.csv")) {
    summary << "\nMonth ablation\n\n";
    auto in = textio::open_input(*ab);
    textio::line_reader lines(in);
    lines.expect("ablation header");
    std::vector<std::string> significant;
    std::string line;
    while (lines.next(line)) {
      auto f = textio::split(line, ',');
      if (f.size() != 8) throw parse_error(ab->string() + ": expected 8 fields per row");
      char buf[160];
      std::snprintf(buf, sizeof buf, "month %2s  degradation %+.4f  p = %s%s", std::string(f[0]).c_str(),
                    textio::parse_real(f[3]), std::string(f[5]).c_str(), f[7] == "yes" ? "  *" : "");
      summary << buf << '\n';
      if (f[7] == "yes") significant.emplace_back(f[0]);
    }
    summary << "significant months:";
    if (significant.empty()) summary << " none";
    for (const auto& m : significant) summary << ' ' << m;
    summary << '\n';
  }
  ctx.write("summary.txt", [&](std::ostream& out) { out << summary.str(); });
  std::cout << summary.str();
}

}  // namespace

int main(int argc, char** argv) {
  options opt;
  CLI::App app{"Subsidence InSAR pipeline: simulate, invert, fuse, train, evaluate"};
  app.set_version_flag("--version", SUBSIGHT_VERSION);
  app.require_subcommand(1, 1);
  app.fallthrough();

  app.add_option("--config", opt.config_path, "key = value configuration file");
  app.add_option("--seed", opt.seed, "override the configured seed");
  app.add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--out", opt.out, "output directory");
  app.add_option("--in", opt.in, "input directory (repeatable; defaults to --out)");

  struct sub_def {
    const char* name;
    const char* help;
  };
  const sub_def subs[] = {
      {"simulate", "generate a synthetic scenario and interferogram stack"},
      {"invert", "SBAS inversion of stack.stk"},
      {"fuse", "align sources and build samples.csv"},
      {"train", "fit a model on samples.csv"},
      {"eval", "run evaluation protocols"},
      {"ablate", "leave-one-month-out ablation"},
      {"report", "summarize report.csv and draw scatter plots"},
  };
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->callback([&opt, name = s.name] { opt.subcommand = name; });
    std::string n = s.name;
    if (n == "train" || n == "eval" || n == "ablate") sub->add_option("--model", opt.models, "tree, forest or net (repeatable for train and eval)");
    if (n == "eval") sub->add_option("--protocol", opt.protocols, "holdout:F, kfold:K, distance:M or month:N");
    if (n == "ablate") sub->add_option("--months", opt.months, "'all' or a comma list of months");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  auto t0 = std::chrono::steady_clock::now();
  try {
    for (const auto& m : opt.models) learn::parse_kind(m);
    run_context ctx(opt);
    if (opt.subcommand == "simulate") cmd_simulate(ctx);
    else if (opt.subcommand == "invert") cmd_invert(ctx);
    else if (opt.subcommand == "fuse") cmd_fuse(ctx);
    else if (opt.subcommand == "train") cmd_train(ctx, opt);
    else if (opt.subcommand == "eval") cmd_eval(ctx, opt);
    else if (opt.subcommand == "ablate") cmd_ablate(ctx, opt);
    else if (opt.subcommand == "report") cmd_report(ctx);
    auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.write_manifest(wall);
    return 0;
  } catch (const config_error& e) {
    std::cerr << "subsight: " << e.what() << '\n';
    return 1;
  } catch (const usage_error& e) {
    std::cerr << "subsight: usage error: " << e.what() << '\n';
    return 1;
  } catch (const data_error& e) {
    std::cerr << "subsight: data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "subsight: data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "subsight: error: " << e.what() << '\n';
    return 2;
  }
}
