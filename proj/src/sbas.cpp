#include "subsight/sbas.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "subsight/error.hpp"
#include "subsight/parallel.hpp"
#include "subsight/raster.hpp"
#include "subsight/textio.hpp"

namespace subsight::sbas {

namespace {

constexpr std::string_view kStackMagic = "SUBSIGHT-STACK v1";
constexpr double kDaysPerYear = 365.0;

}  // namespace

void acquisition_set::validate() const {
  if (dates.empty()) throw data_error("acquisition set is empty");
  if (bperp_m.size() != dates.size()) throw data_error("need one perpendicular baseline per acquisition");
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (!(dates[i - 1] < dates[i])) throw data_error("acquisition dates must be strictly increasing");
  for (double b : bperp_m)
    if (!std::isfinite(b)) throw data_error("perpendicular baselines must be finite");
}

// ------------------------------------------------------------------ stack

interferogram_stack::interferogram_stack(spatial_grid space, acquisition_set acquisitions,
                                         std::vector<epoch_pair> pairs, int max_baseline_days,
                                         std::vector<double> pair_bperp_m)
    : space_(space),
      acq_(std::move(acquisitions)),
      pairs_(std::move(pairs)),
      max_baseline_days_(max_baseline_days),
      pair_bperp_(std::move(pair_bperp_m)) {
  space_.validate();
  acq_.validate();
  if (max_baseline_days_ < 0) throw data_error("max_baseline_days must be >= 0");
  std::vector<epoch_pair> sorted = pairs_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw data_error("duplicate interferogram pair");
  for (const auto& p : pairs_) {
    if (p.j <= p.i || p.j >= acq_.size())
      throw data_error("invalid pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ")");
    if (acq_.dates[p.j] - acq_.dates[p.i] > max_baseline_days_)
      throw data_error("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ") exceeds the " +
                       std::to_string(max_baseline_days_) + "-day temporal baseline");
  }
  if (pair_bperp_.empty()) pair_bperp_ = sbas::pair_baselines(pairs_, acq_);
  if (pair_bperp_.size() != pairs_.size()) throw data_error("need one perpendicular baseline per pair");
  for (double b : pair_bperp_)
    if (!std::isfinite(b)) throw data_error("pair baselines must be finite");
  values_.assign(pairs_.size() * space_.cells(), 0.0);
  mask_.assign(values_.size(), 1);
}

std::size_t interferogram_stack::index(std::size_t pair, std::size_t cell) const {
  if (pair >= n_pairs() || cell >= n_cells()) throw data_error("stack index out of range");
  return pair * n_cells() + cell;
}

double interferogram_stack::at(std::size_t pair, std::size_t cell) const {
  std::size_t k = index(pair, cell);
  if (!mask_[k])
    throw masked_read_error("read of masked interferogram entry (pair " + std::to_string(pair) + ", cell " +
                            std::to_string(cell) + ")");
  return values_[k];
}

std::optional<double> interferogram_stack::get(std::size_t pair, std::size_t cell) const {
  std::size_t k = index(pair, cell);
  if (!mask_[k]) return std::nullopt;
  return values_[k];
}

void interferogram_stack::set(std::size_t pair, std::size_t cell, double mm) {
  if (!std::isfinite(mm)) throw data_error("interferogram values must be finite");
  std::size_t k = index(pair, cell);
  values_[k] = mm;
  mask_[k] = 1;
}

void interferogram_stack::mask(std::size_t pair, std::size_t cell) {
  std::size_t k = index(pair, cell);
  values_[k] = 0.0;
  mask_[k] = 0;
}

void write_stack(const interferogram_stack& stack, std::ostream& out) {
  const auto& g = stack.space();
  const auto& acq = stack.acquisitions();
  out << kStackMagic << '\n';
  out << g.rows << ' ' << g.cols << ' ' << acq.size() << ' ' << stack.n_pairs() << ' '
      << textio::format_real(g.cell_size_m) << ' ' << textio::format_real(g.origin_x) << ' '
      << textio::format_real(g.origin_y) << ' ' << stack.max_baseline_days() << '\n';
  for (std::size_t t = 0; t < acq.size(); ++t) out << (t ? " " : "") << acq.dates[t].iso();
  out << '\n';
  for (std::size_t t = 0; t < acq.size(); ++t) out << (t ? " " : "") << textio::format_real(acq.bperp_m[t]);
  out << '\n';
  for (std::size_t p = 0; p < stack.n_pairs(); ++p)
    out << (p ? " " : "") << stack.pairs()[p].i << ':' << stack.pairs()[p].j;
  out << '\n';
  for (std::size_t p = 0; p < stack.n_pairs(); ++p)
    out << (p ? " " : "") << textio::format_real(stack.pair_baselines()[p]);
  out << '\n';
  for (std::size_t p = 0; p < stack.n_pairs(); ++p) {
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        auto v = stack.get(p, g.cell_id(r, c));
        out << (c ? " " : "") << (v ? textio::format_real(*v) : "NA");
      }
      out << '\n';
    }
  }
}

void write_stack(const interferogram_stack& stack, const std::filesystem::path& path) {
  auto out = textio::open_output(path);
  write_stack(stack, out);
  textio::finish_output(out, path);
}

interferogram_stack read_stack(std::istream& in) {
  textio::line_reader lines(in);
  if (textio::trim(lines.expect("magic line")) != kStackMagic)
    throw parse_error("malformed header: expected '" + std::string(kStackMagic) + "'");
  std::string dims_line = lines.expect("dims line");
  auto dims = textio::split_ws(dims_line);
  if (dims.size() != 8) throw parse_error("malformed header: stack dims line needs 8 fields");
  auto dim = [](std::string_view tok) {
    long long v = textio::parse_int(tok);
    if (v < 0) throw parse_error("malformed header: negative dimension");
    return static_cast<std::size_t>(v);
  };
  spatial_grid g;
  g.rows = dim(dims[0]);
  g.cols = dim(dims[1]);
  std::size_t n_epochs = dim(dims[2]);
  std::size_t n_pairs = dim(dims[3]);
  g.cell_size_m = textio::parse_real(dims[4]);
  g.origin_x = textio::parse_real(dims[5]);
  g.origin_y = textio::parse_real(dims[6]);
  int max_days = static_cast<int>(textio::parse_int(dims[7]));

  acquisition_set acq;
  std::string date_line = lines.expect("date line");
  for (auto d : textio::split_ws(date_line)) acq.dates.push_back(date::parse(d));
  std::string b_line = lines.expect("baseline line");
  for (auto b : textio::split_ws(b_line)) acq.bperp_m.push_back(textio::parse_real(b));
  if (acq.dates.size() != n_epochs || acq.bperp_m.size() != n_epochs)
    throw parse_error("dimension mismatch: date/baseline counts differ from declared epochs");
  for (std::size_t i = 1; i < acq.dates.size(); ++i)
    if (!(acq.dates[i - 1] < acq.dates[i])) throw parse_error("non-increasing dates in stack header");

  std::string pair_line = lines.expect("pair line");
  std::vector<epoch_pair> pairs;
  for (auto tok : textio::split_ws(pair_line)) {
    auto colon = tok.find(':');
    if (colon == std::string_view::npos) throw parse_error("malformed pair token '" + std::string(tok) + "'");
    pairs.push_back({static_cast<std::size_t>(textio::parse_int(tok.substr(0, colon))),
                     static_cast<std::size_t>(textio::parse_int(tok.substr(colon + 1)))});
  }
  if (pairs.size() != n_pairs) throw parse_error("dimension mismatch: pair count differs from header");
  std::string pb_line = lines.expect("pair baseline line");
  std::vector<double> pair_b;
  for (auto b : textio::split_ws(pb_line)) pair_b.push_back(textio::parse_real(b));
  if (pair_b.size() != n_pairs) throw parse_error("dimension mismatch: pair baseline count differs from header");

  interferogram_stack stack = [&] {
    try {
      return interferogram_stack(g, acq, pairs, max_days, pair_b);
    } catch (const parse_error&) {
      throw;
    } catch (const data_error& e) {
      throw parse_error(std::string("invalid stack header: ") + e.what());
    }
  }();
  const std::size_t expected = n_pairs * g.cells();
  textio::token_reader tokens(in);
  std::string tok;
  std::size_t k = 0;
  while (tokens.next(tok)) {
    if (k >= expected) throw parse_error("dimension mismatch: extra stack tokens");
    std::size_t p = k / g.cells(), cell = k % g.cells();
    if (tok == "NA")
      stack.mask(p, cell);
    else
      stack.set(p, cell, textio::parse_real(tok));
    ++k;
  }
  if (k != expected)
    throw parse_error("dimension mismatch: header declares " + std::to_string(expected) + " stack tokens, found " +
                      std::to_string(k));
  return stack;
}

interferogram_stack read_stack(const std::filesystem::path& path) {
  auto in = textio::open_input(path);
  return read_stack(in);
}

// ---------------------------------------------------------------- network

std::vector<epoch_pair> build_pairs(const acquisition_set& acquisitions, int max_baseline_days) {
  std::vector<epoch_pair> pairs;
  const auto& d = acquisitions.dates;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size() && d[j] - d[i] <= max_baseline_days; ++j) pairs.push_back({i, j});
  return pairs;
}

connectivity check_connectivity(std::span<const epoch_pair> pairs, std::size_t n_epochs) {
  std::vector<std::size_t> parent(n_epochs);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& p : pairs) {
    if (p.i >= n_epochs || p.j >= n_epochs) throw data_error("pair index beyond epoch count");
    std::size_t a = find(p.i), b = find(p.j);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  connectivity out;
  out.component.resize(n_epochs);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    out.component[e] = find(e);
    if (out.component[e] == e) ++out.n_components;
  }
  out.connected = out.n_components <= 1;
  return out;
}

std::vector<double> pair_baselines(std::span<const epoch_pair> pairs, const acquisition_set& acquisitions) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.i >= acquisitions.size() || p.j >= acquisitions.size()) throw data_error("pair index out of range");
    out.push_back(acquisitions.bperp_m[p.j] - acquisitions.bperp_m[p.i]);
  }
  return out;
}

design_matrix::design_matrix(std::span<const epoch_pair> pairs, const acquisition_set& acquisitions,
                             bool estimate_dem)
    : design_matrix(pairs, acquisitions.size(), (acquisitions.validate(), pair_baselines(pairs, acquisitions)),
                    estimate_dem) {}

design_matrix::design_matrix(std::span<const epoch_pair> pairs, std::size_t n_epochs,
                             std::span<const double> pair_bperp_m, bool estimate_dem)
    : n_epochs_(n_epochs), estimate_dem_(estimate_dem) {
  if (n_epochs == 0) throw data_error("design needs at least one epoch");
  if (estimate_dem && pair_bperp_m.size() != pairs.size()) throw data_error("need one baseline per pair");
  for (const auto& p : pairs)
    if (p.j <= p.i || p.j >= n_epochs) throw data_error("invalid pair in design");
  auto conn = check_connectivity(pairs, n_epochs_);
  if (!conn.connected)
    throw connectivity_error("interferogram network is disconnected (" + std::to_string(conn.n_components) +
                             " components)");
  const auto n_cols = static_cast<Eigen::Index>(n_epochs_ - 1 + (estimate_dem ? 1 : 0));
  a_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pairs.size()), n_cols);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const auto row = static_cast<Eigen::Index>(k);
    a_(row, static_cast<Eigen::Index>(p.j) - 1) = 1.0;
    if (p.i > 0) a_(row, static_cast<Eigen::Index>(p.i) - 1) = -1.0;
    if (estimate_dem) a_(row, n_cols - 1) = pair_bperp_m[k];
  }
}

least_squares_solver::least_squares_solver(const design_matrix& design)
    : design_(design.dense()), n_epochs_(design.n_epochs()), has_dem_(design.has_dem_column()) {
  if (design_.cols() == 0) {
    pinv_.resize(0, design_.rows());
    return;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
  qr.setThreshold(1e-10);
  if (qr.rank() < design_.cols())
    throw rank_error("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                     std::to_string(design_.cols()) + " unknowns)");
  pinv_ = qr.solve(Eigen::MatrixXd::Identity(design_.rows(), design_.rows()));
}

cell_solution least_squares_solver::solve(std::span<const double> observations) const {
  if (observations.size() != static_cast<std::size_t>(design_.rows()))
    throw data_error("observation count does not match design rows");
  Eigen::Map<const Eigen::VectorXd> obs(observations.data(), design_.rows());
  Eigen::VectorXd x = pinv_ * obs;
  cell_solution s;
  s.series.assign(n_epochs_, 0.0);
  for (std::size_t e = 1; e < n_epochs_; ++e) s.series[e] = x(static_cast<Eigen::Index>(e) - 1);
  if (has_dem_) s.dem_coeff = x(x.size() - 1);
  if (design_.rows() > 0) {
    Eigen::VectorXd r = obs - design_ * x;
    s.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  }
  return s;
}

cell_solution invert_cell(std::span<const double> observations, const design_matrix& design) {
  return least_squares_solver(design).solve(observations);
}

double mean_velocity(std::span<const double> series, std::span<const date> dates) {
  if (series.size() != dates.size()) throw data_error("series and dates differ in length");
  if (series.size() < 2) throw data_error("mean velocity needs at least 2 epochs");
  const double n = static_cast<double>(series.size());
  double tm = 0.0, ym = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    tm += static_cast<double>(dates[k] - dates[0]);
    ym += series[k];
  }
  tm /= n;
  ym /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    double dt = static_cast<double>(dates[k] - dates[0]) - tm;
    sxy += dt * (series[k] - ym);
    sxx += dt * dt;
  }
  return sxy / sxx * kDaysPerYear;
}

// --------------------------------------------------------------- inversion

inversion_result invert_stack(const interferogram_stack& stack, const inversion_options& options) {
  const auto& acq = stack.acquisitions();
  const auto& pairs = stack.pairs();
  const std::size_t n_cells = stack.n_cells();
  space_time_grid grid{stack.space(), acq.dates, std::nullopt};

  const auto& pair_b = stack.pair_baselines();
  design_matrix full(pairs, acq.size(), pair_b, options.estimate_dem);
  least_squares_solver full_solver(full);

  inversion_result res{data_cube(grid, variable::displacement_mm), std::vector<double>(n_cells, 0.0),
                       std::vector<double>(n_cells, 0.0), std::vector<double>(n_cells, 0.0),
                       std::vector<unsigned char>(n_cells, 0)};
  std::vector<std::vector<double>> series(n_cells);

  parallel_for(n_cells, options.threads, [&](std::size_t cell) {
    std::vector<double> obs;
    std::vector<epoch_pair> valid_pairs;
    std::vector<double> valid_b;
    obs.reserve(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (auto v = stack.get(p, cell)) {
        obs.push_back(*v);
        valid_pairs.push_back(pairs[p]);
        valid_b.push_back(pair_b[p]);
      }
    }
    cell_solution sol;
    if (valid_pairs.size() == pairs.size()) {
      sol = full_solver.solve(obs);
    } else {
      try {
        design_matrix reduced(valid_pairs, acq.size(), valid_b, options.estimate_dem);
        sol = least_squares_solver(reduced).solve(obs);
      } catch (const connectivity_error&) {
        return;
      } catch (const rank_error&) {
        return;
      }
    }
    res.velocity_mm_per_year[cell] = acq.size() >= 2 ? mean_velocity(sol.series, acq.dates) : 0.0;
    res.dem_coeff_mm_per_m[cell] = sol.dem_coeff;
    res.residual_rms_mm[cell] = sol.residual_rms;
    res.connected[cell] = 1;
    series[cell] = std::move(sol.series);
  });

  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    if (!res.connected[cell]) {
      res.displacement.mask_cell(cell);
      continue;
    }
    for (std::size_t e = 0; e < acq.size(); ++e) res.displacement.set(cell, e, series[cell][e]);
  }
  return res;
}

void write_inversion_summary(const inversion_result& result, const std::filesystem::path& path) {
  auto out = textio::open_output(path);
  const auto& g = result.displacement.grid().space;
  out << "cell_id,row,col,connected,velocity_mm_per_year,dem_coeff_mm_per_m,residual_rms_mm\n";
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      std::size_t cell = g.cell_id(r, c);
      out << cell << ',' << r << ',' << c << ',' << int(result.connected[cell]) << ',';
      if (result.connected[cell])
        out << textio::format_real(result.velocity_mm_per_year[cell]) << ','
            << textio::format_real(result.dem_coeff_mm_per_m[cell]) << ','
            << textio::format_real(result.residual_rms_mm[cell]) << '\n';
      else
        out << "NA,NA,NA\n";
    }
  }
  textio::finish_output(out, path);
}

// ------------------------------------------------------------------ filter

data_cube spatiotemporal_filter(const data_cube& cube, std::size_t window_epochs, double sigma_cells) {
  const std::size_t n_epochs = cube.n_epochs();
  const std::size_t n_cells = cube.n_cells();
  if (window_epochs == 0 || window_epochs % 2 == 0) throw data_error("filter window must be a positive odd count");
  if (window_epochs > n_epochs)
    throw data_error("filter window (" + std::to_string(window_epochs) + ") is larger than the series (" +
                     std::to_string(n_epochs) + ")");
  if (sigma_cells < 0.0) throw data_error("spatial sigma must be >= 0");
  const std::size_t half = window_epochs / 2;

  // Temporal high-pass residual, epoch-major for the spatial pass.
  std::vector<double> residual(n_cells * n_epochs, 0.0);
  std::vector<unsigned char> valid(n_cells * n_epochs, 0);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    for (std::size_t t = 0; t < n_epochs; ++t) {
      auto v = cube.get(cell, t);
      if (!v) continue;
      std::size_t lo = t >= half ? t - half : 0, hi = std::min(n_epochs - 1, t + half);
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t s = lo; s <= hi; ++s)
        if (auto w = cube.get(cell, s)) {
          sum += *w;
          ++n;
        }
      residual[t * n_cells + cell] = *v - sum / static_cast<double>(n);
      valid[t * n_cells + cell] = 1;
    }
  }

  data_cube out = cube;
  std::vector<double> noise(n_cells * n_epochs, 0.0);
  for (std::size_t t = 0; t < n_epochs; ++t) {
    std::span<const double> field(residual.data() + t * n_cells, n_cells);
    std::span<const unsigned char> mask(valid.data() + t * n_cells, n_cells);
    auto low = raster::gaussian_lowpass(field, mask, cube.grid().space, sigma_cells);
    std::copy(low.begin(), low.end(), noise.begin() + static_cast<std::ptrdiff_t>(t * n_cells));
  }
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    const double pin = cube.valid(cell, 0) ? noise[cell] : 0.0;
    for (std::size_t t = 0; t < n_epochs; ++t) {
      auto v = cube.get(cell, t);
      if (!v) continue;
      out.set(cell, t, *v - (noise[t * n_cells + cell] - pin));
    }
  }
  return out;
}

}  // namespace subsight::sbas
