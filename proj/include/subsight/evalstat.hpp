#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "subsight/dates.hpp"
#include "subsight/gridstore.hpp"
#include "subsight/learn/model.hpp"

namespace subsight::evalstat {

// Sample Pearson correlation; throws data_error for constant inputs.
double pearson_r(std::span<const double> x, std::span<const double> y);

// All predicted layers against all true layers of the given rows.
double layered_r(std::span<const double> predictions, const sample_table& truth);

struct split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded uniform split of n rows; train gets round(fraction * n).
split split_fraction(std::size_t n, double train_fraction, std::uint64_t seed);

// Greedy acceptance in seeded random order: a candidate row survives if it
// is at least min_distance_m from every row accepted so far.
std::vector<std::size_t> thin_by_distance(const sample_table& samples, std::span<const std::size_t> candidates,
                                          double min_distance_m, std::uint64_t seed);
std::vector<std::size_t> thin_by_distance(const sample_table& samples, double min_distance_m, std::uint64_t seed);

// Seeded partition of n rows into k folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

struct protocol {
  enum class kind { holdout, kfold, distance, month };
  kind type = kind::holdout;
  double fraction = 0.6;   // holdout; also the base split for distance
  std::size_t folds = 10;  // kfold; also the CV used by month
  double min_distance_m = 10000.0;
  unsigned month = 1;

  // holdout:F, kfold:K, distance:M, month:N
  static protocol parse(std::string_view text);
  std::string str() const;
  void validate() const;
};

enum class ablation_mode { remove, zero_fill };

std::string_view mode_name(ablation_mode m);
ablation_mode parse_mode(std::string_view name);

// Feature columns (channel-blocked, `channels` blocks of epochs.size())
// whose epoch falls in `month`. Throws when the month has no epochs.
std::vector<bool> month_columns(std::span<const date> epochs, unsigned month, std::size_t channels);

sample_table ablate_month(const sample_table& samples, std::span<const date> epochs, unsigned month,
                          std::size_t channels, ablation_mode mode);

struct significance_result {
  double mean_degradation = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  double threshold = 0.0;
  bool significant = false;
};

// Two-sided one-sample t-test of the degradations against zero. A month
// is flagged when p < alpha / n_comparisons and the mean degradation is
// positive.
significance_result significance(std::span<const double> degradations, double alpha = 0.05,
                                 std::size_t n_comparisons = 12);

struct month_result {
  unsigned month = 0;
  std::vector<double> ablated_r;    // per fold
  std::vector<double> degradation;  // per fold, full R minus ablated R
  significance_result stats;
};

struct ablation_table {
  std::vector<double> full_r;  // per fold
  std::vector<month_result> months;
};

struct ablation_options {
  std::size_t folds = 10;
  ablation_mode mode = ablation_mode::remove;
  double alpha = 0.05;
  std::size_t n_comparisons = 12;
  int threads = 1;
};

// Retrains per fold: the full and ablated models share fold-train rows and
// seed; degradation is measured on the fold's test rows.
ablation_table month_ablation(const sample_table& samples, std::span<const date> epochs,
                              std::span<const unsigned> months, const learn::model_spec& spec, std::uint64_t seed,
                              const ablation_options& options);

void write_ablation_csv(const ablation_table& table, std::ostream& out);

struct report_row {
  std::string protocol;
  std::string model;
  double r = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  std::optional<double> p_value;

  bool operator==(const report_row&) const = default;
};

struct evaluation {
  report_row row;
  std::vector<double> truth;      // test rows x targets, percent
  std::vector<double> predicted;  // same layout
};

// Runs one protocol end to end. `epochs` is needed for month protocols.
evaluation evaluate(const sample_table& samples, const protocol& p, const learn::model_spec& spec,
                    std::uint64_t seed, std::span<const date> epochs = {}, int threads = 1);

// Header: protocol,model,R,n_train,n_test,seed,p_value
void write_report_csv(std::span<const report_row> rows, std::ostream& out);
std::vector<report_row> read_report_csv(std::istream& in);

// Standalone SVG of predicted against true values with a y = x guide.
void write_scatter_svg(std::span<const double> truth, std::span<const double> predicted, std::string_view title,
                       std::ostream& out);

// Writes report.csv and one scatter per evaluation into `dir`.
void make_report(std::span<const evaluation> results, const std::filesystem::path& dir);

}  // namespace subsight::evalstat
