#include "subsight/evalstat.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "subsight/error.hpp"
#include "subsight/random.hpp"
#include "subsight/textio.hpp"

namespace subsight::evalstat {

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw data_error("correlation needs equal-length inputs");
  if (x.size() < 2) throw data_error("correlation needs at least two values");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw data_error("correlation is undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double layered_r(std::span<const double> predictions, const sample_table& truth) {
  auto t = truth.target_matrix();
  if (predictions.size() != t.size())
    throw data_error("prediction block does not match the truth (" + std::to_string(predictions.size()) + " vs " +
                     std::to_string(t.size()) + ")");
  return pearson_r(predictions, t);
}

split split_fraction(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw usage_error("train fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw data_error("fraction " + textio::format_real(train_fraction) + " of " + std::to_string(n) +
                     " rows leaves an empty side");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_stream rng(stream_key(seed, 0x5011));
  shuffle(order, rng);
  split s{{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)},
          {order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()}};
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::size_t> thin_by_distance(const sample_table& samples, std::span<const std::size_t> candidates,
                                          double min_distance_m, std::uint64_t seed) {
  if (!std::isfinite(min_distance_m) || min_distance_m < 0.0) throw usage_error("minimum distance must be >= 0");
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  for (auto r : order)
    if (r >= samples.size()) throw data_error("candidate row out of range");
  rng_stream rng(stream_key(seed, 0x7411));
  shuffle(order, rng);
  std::vector<std::size_t> kept;
  for (auto r : order) {
    bool ok = true;
    for (auto k : kept) {
      if (std::hypot(samples.x(r) - samples.x(k), samples.y(r) - samples.y(k)) < min_distance_m) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(r);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<std::size_t> thin_by_distance(const sample_table& samples, double min_distance_m, std::uint64_t seed) {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return thin_by_distance(samples, all, min_distance_m, seed);
}

std::vector<std::vector<std::size_t>> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw usage_error("k-fold needs k >= 2");
  if (k > n) throw data_error(std::to_string(k) + " folds requested for " + std::to_string(n) + " rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_stream rng(stream_key(seed, 0xf01d));
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

protocol protocol::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw usage_error("protocol '" + std::string(text) + "' must look like holdout:F, kfold:K, distance:M or month:N");
  auto name = text.substr(0, colon), arg = text.substr(colon + 1);
  protocol p;
  try {
    if (name == "holdout") {
      p.type = kind::holdout;
      p.fraction = textio::parse_real(arg);
    } else if (name == "kfold") {
      p.type = kind::kfold;
      auto v = textio::parse_int(arg);
      if (v < 0) throw usage_error("k-fold needs k >= 2");
      p.folds = static_cast<std::size_t>(v);
    } else if (name == "distance") {
      p.type = kind::distance;
      p.min_distance_m = textio::parse_real(arg);
    } else if (name == "month") {
      p.type = kind::month;
      auto v = textio::parse_int(arg);
      if (v < 1 || v > 12) throw usage_error("month must be in 1..12");
      p.month = static_cast<unsigned>(v);
    } else {
      throw usage_error("unknown protocol '" + std::string(name) + "'");
    }
  } catch (const parse_error&) {
    throw usage_error("bad protocol argument in '" + std::string(text) + "'");
  }
  p.validate();
  return p;
}

std::string protocol::str() const {
  switch (type) {
    case kind::holdout: return "holdout:" + textio::format_real(fraction);
    case kind::kfold: return "kfold:" + std::to_string(folds);
    case kind::distance: {
      // Whole meters print without a fraction, matching how they are typed.
      if (min_distance_m == std::floor(min_distance_m) && std::abs(min_distance_m) < 1e15)
        return "distance:" + std::to_string(static_cast<long long>(min_distance_m));
      return "distance:" + textio::format_real(min_distance_m);
    }
    case kind::month: return "month:" + std::to_string(month);
  }
  return {};
}

void protocol::validate() const {
  if (!(fraction > 0.0 && fraction < 1.0)) throw usage_error("holdout fraction must lie in (0, 1)");
  if (folds < 2) throw usage_error("k-fold needs k >= 2");
  if (!(min_distance_m > 0.0) || !std::isfinite(min_distance_m))
    throw usage_error("distance protocol needs a positive minimum distance");
  if (month < 1 || month > 12) throw usage_error("month must be in 1..12");
}

std::string_view mode_name(ablation_mode m) { return m == ablation_mode::remove ? "remove" : "zero_fill"; }

ablation_mode parse_mode(std::string_view name) {
  if (name == "remove") return ablation_mode::remove;
  if (name == "zero_fill") return ablation_mode::zero_fill;
  throw usage_error("unknown ablation mode '" + std::string(name) + "' (remove|zero_fill)");
}

std::vector<bool> month_columns(std::span<const date> epochs, unsigned month, std::size_t channels) {
  if (month < 1 || month > 12) throw usage_error("month must be in 1..12");
  const std::size_t L = epochs.size();
  std::vector<bool> flags(channels * L, false);
  bool any = false;
  for (std::size_t t = 0; t < L; ++t) {
    if (epochs[t].month() != month) continue;
    any = true;
    for (std::size_t c = 0; c < channels; ++c) flags[c * L + t] = true;
  }
  if (!any) throw data_error("month " + std::to_string(month) + " has no epochs; nothing to ablate");
  return flags;
}

sample_table ablate_month(const sample_table& samples, std::span<const date> epochs, unsigned month,
                          std::size_t channels, ablation_mode mode) {
  if (samples.n_features() != channels * epochs.size())
    throw data_error("samples have " + std::to_string(samples.n_features()) + " features but " +
                     std::to_string(channels) + " channels x " + std::to_string(epochs.size()) + " epochs");
  auto flags = month_columns(epochs, month, channels);
  if (mode == ablation_mode::zero_fill) return samples.zero_features(flags);
  std::vector<bool> keep(flags.size());
  for (std::size_t i = 0; i < flags.size(); ++i) keep[i] = !flags[i];
  return samples.select_features(keep);
}

significance_result significance(std::span<const double> d, double alpha, std::size_t n_comparisons) {
  if (d.size() < 2) throw data_error("significance needs at least two folds");
  if (n_comparisons < 1) throw usage_error("n_comparisons must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw usage_error("alpha must lie in (0, 1)");
  significance_result r;
  r.threshold = alpha / static_cast<double>(n_comparisons);
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  r.mean_degradation = mean;
  if (sd == 0.0) {
    if (mean == 0.0) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p_value = 0.0;
    }
  } else {
    r.t_statistic = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic)));
  }
  r.significant = r.p_value < r.threshold && mean > 0.0;
  return r;
}

namespace {

std::vector<std::size_t> complement_of(const std::vector<std::size_t>& fold, std::size_t n) {
  std::vector<bool> in(n, false);
  for (auto r : fold) in[r] = true;
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < n; ++r)
    if (!in[r]) out.push_back(r);
  return out;
}

struct fold_outcome {
  std::vector<double> r;
  std::vector<double> truth, predicted;
};

fold_outcome run_folds(const sample_table& samples, const std::vector<std::vector<std::size_t>>& folds,
                       const learn::model_spec& spec, std::uint64_t seed, int threads) {
  fold_outcome out;
  for (const auto& fold : folds) {
    auto train = samples.subset(complement_of(fold, samples.size()));
    auto test = samples.subset(fold);
    auto model = learn::fit_model(train, spec, seed, threads);
    auto pred = model.predict_all(test, threads);
    out.r.push_back(layered_r(pred, test));
    out.truth.insert(out.truth.end(), test.target_matrix().begin(), test.target_matrix().end());
    out.predicted.insert(out.predicted.end(), pred.begin(), pred.end());
  }
  return out;
}

}  // namespace

ablation_table month_ablation(const sample_table& samples, std::span<const date> epochs,
                              std::span<const unsigned> months, const learn::model_spec& spec, std::uint64_t seed,
                              const ablation_options& options) {
  if (months.empty()) throw usage_error("no months to ablate");
  // Validate every month before spending time on training.
  std::vector<sample_table> ablated;
  for (unsigned m : months) ablated.push_back(ablate_month(samples, epochs, m, spec.channels, options.mode));
  auto folds = kfold(samples.size(), options.folds, seed);
  ablation_table table;
  table.full_r = run_folds(samples, folds, spec, seed, options.threads).r;
  for (std::size_t k = 0; k < months.size(); ++k) {
    month_result mr;
    mr.month = months[k];
    mr.ablated_r = run_folds(ablated[k], folds, spec, seed, options.threads).r;
    for (std::size_t f = 0; f < folds.size(); ++f) mr.degradation.push_back(table.full_r[f] - mr.ablated_r[f]);
    mr.stats = significance(mr.degradation, options.alpha, options.n_comparisons);
    table.months.push_back(std::move(mr));
  }
  return table;
}

void write_ablation_csv(const ablation_table& table, std::ostream& out) {
  using textio::format_real;
  out << "month,mean_full_R,mean_ablated_R,mean_degradation,t_statistic,p_value,bonferroni_threshold,significant\n";
  double full = 0.0;
  for (double v : table.full_r) full += v;
  full /= static_cast<double>(table.full_r.size());
  for (const auto& m : table.months) {
    double ab = 0.0;
    for (double v : m.ablated_r) ab += v;
    ab /= static_cast<double>(m.ablated_r.size());
    std::string t = std::isfinite(m.stats.t_statistic) ? format_real(m.stats.t_statistic)
                                                       : (m.stats.t_statistic > 0 ? "inf" : "-inf");
    out << m.month << ',' << format_real(full) << ',' << format_real(ab) << ',' << format_real(m.stats.mean_degradation)
        << ',' << t << ',' << format_real(m.stats.p_value) << ',' << format_real(m.stats.threshold) << ','
        << (m.stats.significant ? "yes" : "no") << '\n';
  }
}

evaluation evaluate(const sample_table& samples, const protocol& p, const learn::model_spec& spec,
                    std::uint64_t seed, std::span<const date> epochs, int threads) {
  p.validate();
  evaluation ev;
  ev.row.protocol = p.str();
  ev.row.model = std::string(learn::kind_name(spec.kind));
  ev.row.seed = seed;
  auto fit_and_score = [&](const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
    if (train_rows.empty() || test_rows.empty()) throw data_error("protocol left an empty train or test set");
    auto train = samples.subset(train_rows);
    auto test = samples.subset(test_rows);
    auto model = learn::fit_model(train, spec, seed, threads);
    ev.predicted = model.predict_all(test, threads);
    ev.truth.assign(test.target_matrix().begin(), test.target_matrix().end());
    ev.row.r = layered_r(ev.predicted, test);
    ev.row.n_train = train_rows.size();
    ev.row.n_test = test_rows.size();
  };
  switch (p.type) {
    case protocol::kind::holdout: {
      auto s = split_fraction(samples.size(), p.fraction, seed);
      fit_and_score(s.train, s.test);
      break;
    }
    case protocol::kind::distance: {
      auto s = split_fraction(samples.size(), p.fraction, seed);
      fit_and_score(thin_by_distance(samples, s.train, p.min_distance_m, seed), s.test);
      break;
    }
    case protocol::kind::kfold: {
      auto folds = kfold(samples.size(), p.folds, seed);
      auto o = run_folds(samples, folds, spec, seed, threads);
      ev.truth = std::move(o.truth);
      ev.predicted = std::move(o.predicted);
      ev.row.r = pearson_r(ev.predicted, ev.truth);
      ev.row.n_train = samples.size() - folds.back().size();
      ev.row.n_test = samples.size();
      break;
    }
    case protocol::kind::month: {
      if (epochs.empty()) throw usage_error("month protocol needs the epoch dates");
      auto ablated = ablate_month(samples, epochs, p.month, spec.channels, ablation_mode::remove);
      auto folds = kfold(samples.size(), p.folds, seed);
      auto full = run_folds(samples, folds, spec, seed, threads);
      auto o = run_folds(ablated, folds, spec, seed, threads);
      std::vector<double> d;
      for (std::size_t f = 0; f < folds.size(); ++f) d.push_back(full.r[f] - o.r[f]);
      ev.truth = std::move(o.truth);
      ev.predicted = std::move(o.predicted);
      ev.row.r = pearson_r(ev.predicted, ev.truth);
      ev.row.n_train = samples.size() - folds.back().size();
      ev.row.n_test = samples.size();
      ev.row.p_value = significance(d).p_value;
      break;
    }
  }
  return ev;
}

void write_report_csv(std::span<const report_row> rows, std::ostream& out) {
  out << "protocol,model,R,n_train,n_test,seed,p_value\n";
  for (const auto& r : rows)
    out << r.protocol << ',' << r.model << ',' << textio::format_real(r.r) << ',' << r.n_train << ',' << r.n_test
        << ',' << r.seed << ',' << (r.p_value ? textio::format_real(*r.p_value) : "") << '\n';
}

std::vector<report_row> read_report_csv(std::istream& in) {
  textio::line_reader lines(in);
  std::string line;
  if (!lines.next(line) || textio::trim(line) != "protocol,model,R,n_train,n_test,seed,p_value")
    throw parse_error("line 1: malformed report header");
  std::vector<report_row> rows;
  while (lines.next(line)) {
    if (textio::trim(line).empty()) continue;
    auto f = textio::split(line, ',');
    auto fail = [&](const std::string& what) -> void {
      throw parse_error("line " + std::to_string(lines.line_no()) + ": " + what);
    };
    if (f.size() != 7) fail("expected 7 fields, found " + std::to_string(f.size()));
    report_row r;
    r.protocol = std::string(f[0]);
    r.model = std::string(f[1]);
    try {
      r.r = textio::parse_real(f[2]);
      auto a = textio::parse_int(f[3]), b = textio::parse_int(f[4]);
      if (a < 0 || b < 0) fail("negative count");
      r.n_train = static_cast<std::size_t>(a);
      r.n_test = static_cast<std::size_t>(b);
      r.seed = textio::parse_uint(f[5]);
      auto pv = textio::trim(f[6]);
      if (!pv.empty()) r.p_value = textio::parse_real(pv);
    } catch (const parse_error& e) {
      fail(e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_scatter_svg(std::span<const double> truth, std::span<const double> predicted, std::string_view title,
                       std::ostream& out) {
  if (truth.empty() || truth.size() != predicted.size())
    throw data_error("scatter needs non-empty, equal-length truth and predictions");
  double lo = truth[0], hi = truth[0];
  for (std::size_t i = 0; i < truth.size(); ++i) {
    lo = std::min({lo, truth[i], predicted[i]});
    hi = std::max({hi, truth[i], predicted[i]});
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw data_error("non-finite values in scatter data");
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  constexpr double size = 480.0, margin = 50.0, plot = size - 2.0 * margin;
  auto px = [&](double v) { return margin + (v - lo) / (hi - lo) * plot; };
  auto py = [&](double v) { return size - margin - (v - lo) / (hi - lo) * plot; };
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"480\" height=\"480\" fill=\"white\"/>\n";
  out << "<text x=\"240\" y=\"25\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  out << "<rect x=\"50\" y=\"50\" width=\"380\" height=\"380\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"240\" y=\"470\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">true (%)</text>\n";
  out << "<text x=\"15\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 15 240)\">predicted (%)</text>\n";
  out << "<text x=\"50\" y=\"445\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(lo)
      << "</text>\n";
  out << "<text x=\"430\" y=\"445\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(hi)
      << "</text>\n";
  out << "<line class=\"guide\" x1=\"" << fixed(px(lo)) << "\" y1=\"" << fixed(py(lo)) << "\" x2=\"" << fixed(px(hi))
      << "\" y2=\"" << fixed(py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  out << "<g fill=\"steelblue\" fill-opacity=\"0.5\">\n";
  for (std::size_t i = 0; i < truth.size(); ++i)
    out << "<circle cx=\"" << fixed(px(truth[i])) << "\" cy=\"" << fixed(py(predicted[i])) << "\" r=\"1.5\"/>\n";
  out << "</g>\n</svg>\n";
}

void make_report(std::span<const evaluation> results, const std::filesystem::path& dir) {
  if (results.empty()) throw data_error("nothing to report");
  for (const auto& e : results)
    if (e.predicted.empty()) throw data_error("empty predictions for " + e.row.protocol + " / " + e.row.model);
  std::vector<report_row> rows;
  for (const auto& e : results) rows.push_back(e.row);
  {
    auto path = dir / "report.csv";
    auto out = textio::open_output(path);
    write_report_csv(rows, out);
    textio::finish_output(out, path);
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& e = results[i];
    std::string tag = e.row.protocol;
    std::replace(tag.begin(), tag.end(), ':', '-');
    char idx[24];
    std::snprintf(idx, sizeof idx, "%02zu", i + 1);
    auto path = dir / ("scatter_" + std::string(idx) + "_" + e.row.model + "_" + tag + ".svg");
    auto out = textio::open_output(path);
    write_scatter_svg(e.truth, e.predicted,
                      e.row.model + " " + e.row.protocol + "  R=" + fixed(e.row.r) + " (seed " +
                          std::to_string(e.row.seed) + ")",
                      out);
    textio::finish_output(out, path);
  }
}

}  // namespace subsight::evalstat
