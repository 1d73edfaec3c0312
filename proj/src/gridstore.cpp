#include "subsight/gridstore.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include "subsight/error.hpp"
#include "subsight/textio.hpp"

namespace subsight {

namespace {

constexpr std::string_view kCubeMagic = "SUBSIGHT-CUBE v1";
constexpr std::string_view kTextureMagic = "SUBSIGHT-TEX v1";
constexpr std::size_t kMaxEntries = std::size_t{1} << 34;

std::size_t checked_volume(std::size_t a, std::size_t b, std::size_t c) {
  if (a == 0 || b == 0 || c == 0) return 0;
  if (a > kMaxEntries / b || a * b > kMaxEntries / c) throw data_error("dimension overflow");
  return a * b * c;
}

std::size_t to_dim(std::string_view tok, std::string_view what) {
  long long v = textio::parse_int(tok);
  if (v < 1) throw parse_error("malformed header: " + std::string(what) + " must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

void spatial_grid::validate() const {
  if (rows < 1 || cols < 1) throw data_error("grid must have at least one row and column");
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m)) throw data_error("cell_size_m must be > 0");
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) throw data_error("grid origin must be finite");
  checked_volume(rows, cols, 1);
}

void space_time_grid::validate() const {
  space.validate();
  if (epochs.empty()) throw data_error("grid needs at least one epoch");
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (!(epochs[i - 1] < epochs[i]))
      throw data_error("epoch dates must be strictly increasing (" + epochs[i - 1].iso() + ", " +
                       epochs[i].iso() + ")");
    if (epoch_spacing_days && epochs[i] - epochs[i - 1] != *epoch_spacing_days)
      throw data_error("epochs " + epochs[i - 1].iso() + " and " + epochs[i].iso() +
                       " are not " + std::to_string(*epoch_spacing_days) + " days apart");
  }
  checked_volume(space.rows, space.cols, epochs.size());
}

space_time_grid make_regular_grid(const spatial_grid& space, date start, std::size_t count,
                                  int spacing_days) {
  space_time_grid g;
  g.space = space;
  g.epoch_spacing_days = spacing_days;
  g.epochs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) g.epochs.push_back(start + static_cast<int>(i) * spacing_days);
  g.validate();
  return g;
}

std::string_view variable_name(variable v) {
  switch (v) {
    case variable::displacement_mm: return "displacement_mm";
    case variable::groundwater_ft: return "groundwater_ft";
    case variable::precipitation_mm: return "precipitation_mm";
  }
  return "unknown";
}

variable parse_variable(std::string_view name) {
  for (auto v : {variable::displacement_mm, variable::groundwater_ft, variable::precipitation_mm})
    if (variable_name(v) == name) return v;
  throw parse_error("unknown variable '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- data_cube

data_cube::data_cube(space_time_grid grid, variable var, double fill)
    : grid_(std::move(grid)), var_(var) {
  grid_.validate();
  std::size_t n = checked_volume(grid_.space.rows, grid_.space.cols, grid_.n_epochs());
  values_.assign(n, fill);
  mask_.assign(n, 1);
}

std::size_t data_cube::index(std::size_t cell, std::size_t epoch) const {
  if (cell >= n_cells() || epoch >= n_epochs()) throw data_error("cube index out of range");
  return cell * n_epochs() + epoch;
}

bool data_cube::cell_fully_valid(std::size_t cell) const {
  std::size_t base = index(cell, 0);
  for (std::size_t t = 0; t < n_epochs(); ++t)
    if (!mask_[base + t]) return false;
  return true;
}

std::size_t data_cube::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask_) n += m;
  return n;
}

double data_cube::at(std::size_t cell, std::size_t epoch) const {
  std::size_t i = index(cell, epoch);
  if (!mask_[i])
    throw masked_read_error("read of masked " + std::string(variable_name(var_)) + " entry (cell " +
                            std::to_string(cell) + ", epoch " + std::to_string(epoch) + ")");
  return values_[i];
}

std::optional<double> data_cube::get(std::size_t cell, std::size_t epoch) const {
  std::size_t i = index(cell, epoch);
  if (!mask_[i]) return std::nullopt;
  return values_[i];
}

void data_cube::set(std::size_t cell, std::size_t epoch, double value) {
  if (!std::isfinite(value)) throw data_error("cube values must be finite");
  std::size_t i = index(cell, epoch);
  values_[i] = value;
  mask_[i] = 1;
}

void data_cube::mask(std::size_t cell, std::size_t epoch) {
  std::size_t i = index(cell, epoch);
  values_[i] = 0.0;
  mask_[i] = 0;
}

void data_cube::mask_cell(std::size_t cell) {
  for (std::size_t t = 0; t < n_epochs(); ++t) mask(cell, t);
}

bool data_cube::operator==(const data_cube& o) const {
  return grid_ == o.grid_ && var_ == o.var_ && mask_ == o.mask_ && values_ == o.values_;
}

// ------------------------------------------------------------ texture_stack

texture_stack::texture_stack(spatial_grid grid) : grid_(grid) {
  grid_.validate();
  std::size_t n = checked_volume(grid_.rows, grid_.cols, n_layers);
  values_.assign(n, 0.0);
  defined_.assign(n, 0);
}

bool texture_stack::cell_defined(std::size_t cell) const {
  for (std::size_t l = 0; l < n_layers; ++l)
    if (!defined(cell, l)) return false;
  return true;
}

double texture_stack::at(std::size_t cell, std::size_t layer) const {
  if (cell >= n_cells() || layer >= n_layers) throw data_error("texture index out of range");
  if (!defined(cell, layer))
    throw masked_read_error("read of undefined texture entry (cell " + std::to_string(cell) +
                            ", layer " + std::to_string(layer + 1) + ")");
  return values_[layer * n_cells() + cell];
}

double texture_stack::mean_coarse(std::size_t cell) const {
  double s = 0.0;
  for (std::size_t l = 0; l < n_layers; ++l) s += at(cell, l);
  return s / static_cast<double>(n_layers);
}

void texture_stack::set(std::size_t cell, std::size_t layer, double percent) {
  if (cell >= n_cells() || layer >= n_layers) throw data_error("texture index out of range");
  if (!(percent >= 0.0 && percent <= 100.0))
    throw data_error("coarse-grain percent out of [0, 100]: " + std::to_string(percent));
  values_[layer * n_cells() + cell] = percent;
  defined_[layer * n_cells() + cell] = 1;
}

void texture_stack::undefine(std::size_t cell, std::size_t layer) {
  if (cell >= n_cells() || layer >= n_layers) throw data_error("texture index out of range");
  values_[layer * n_cells() + cell] = 0.0;
  defined_[layer * n_cells() + cell] = 0;
}

// ------------------------------------------------------------- sample_table

sample_table::sample_table(std::size_t n_features, std::size_t n_targets)
    : n_features_(n_features), n_targets_(n_targets) {}

void sample_table::add_row(long long cell_id, double x_m, double y_m, std::span<const double> features,
                           std::span<const double> targets) {
  if (features.size() != n_features_)
    throw data_error("feature vector has " + std::to_string(features.size()) + " values, table expects " +
                     std::to_string(n_features_));
  if (targets.size() != n_targets_)
    throw data_error("target vector has " + std::to_string(targets.size()) + " values, table expects " +
                     std::to_string(n_targets_));
  if (!id_set_.insert(cell_id).second) throw data_error("duplicate cell_id " + std::to_string(cell_id));
  ids_.push_back(cell_id);
  xs_.push_back(x_m);
  ys_.push_back(y_m);
  features_.insert(features_.end(), features.begin(), features.end());
  targets_.insert(targets_.end(), targets.begin(), targets.end());
}

sample_table sample_table::subset(std::span<const std::size_t> rows) const {
  sample_table out(n_features_, n_targets_);
  out.ids_.reserve(rows.size());
  out.features_.reserve(rows.size() * n_features_);
  out.targets_.reserve(rows.size() * n_targets_);
  std::vector<bool> seen(size(), false);
  for (auto r : rows) {
    if (r >= size()) throw data_error("subset row out of range");
    if (seen[r]) throw data_error("subset repeats row " + std::to_string(r));
    seen[r] = true;
    out.ids_.push_back(ids_[r]);
    out.id_set_.insert(ids_[r]);
    out.xs_.push_back(xs_[r]);
    out.ys_.push_back(ys_[r]);
    auto f = features(r);
    auto t = targets(r);
    out.features_.insert(out.features_.end(), f.begin(), f.end());
    out.targets_.insert(out.targets_.end(), t.begin(), t.end());
  }
  return out;
}

sample_table sample_table::select_features(const std::vector<bool>& keep) const {
  if (keep.size() != n_features_) throw data_error("feature selection mask has wrong length");
  std::size_t kept = 0;
  for (bool k : keep) kept += k;
  sample_table out(kept, n_targets_);
  out.ids_ = ids_;
  out.id_set_ = id_set_;
  out.xs_ = xs_;
  out.ys_ = ys_;
  out.targets_ = targets_;
  out.features_.reserve(size() * kept);
  for (std::size_t i = 0; i < size(); ++i) {
    auto f = features(i);
    for (std::size_t j = 0; j < n_features_; ++j)
      if (keep[j]) out.features_.push_back(f[j]);
  }
  return out;
}

sample_table sample_table::zero_features(const std::vector<bool>& which) const {
  if (which.size() != n_features_) throw data_error("feature selection mask has wrong length");
  sample_table out = *this;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 0; j < n_features_; ++j)
      if (which[j]) out.features_[i * n_features_ + j] = 0.0;
  return out;
}

sample_table cube_to_samples(const data_cube& displacement, const texture_stack& texture) {
  const auto& g = displacement.grid().space;
  if (!(g == texture.grid()))
    throw geometry_error("displacement and texture grids do not share spatial geometry");
  sample_table table(displacement.n_epochs());
  std::vector<double> f(displacement.n_epochs());
  std::vector<double> t(texture_stack::n_layers);
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      std::size_t cell = g.cell_id(r, c);
      if (!displacement.cell_fully_valid(cell) || !texture.cell_defined(cell)) continue;
      for (std::size_t e = 0; e < f.size(); ++e) f[e] = displacement.at(cell, e);
      for (std::size_t l = 0; l < t.size(); ++l) t[l] = texture.at(cell, l);
      table.add_row(static_cast<long long>(cell), g.center_x(c), g.center_y(r), f, t);
    }
  }
  return table;
}

// ---------------------------------------------------------------------- I/O

namespace {

void write_spatial_dims(std::ostream& out, const spatial_grid& g, std::size_t depth) {
  out << g.rows << ' ' << g.cols << ' ' << depth << ' ' << textio::format_real(g.cell_size_m) << ' '
      << textio::format_real(g.origin_x) << ' ' << textio::format_real(g.origin_y) << '\n';
}

spatial_grid read_spatial_dims(const std::vector<std::string_view>& tok, std::size_t& depth,
                               std::string_view depth_name) {
  if (tok.size() != 6) throw parse_error("malformed header: dims line needs 6 fields");
  spatial_grid g;
  g.rows = to_dim(tok[0], "rows");
  g.cols = to_dim(tok[1], "cols");
  depth = to_dim(tok[2], depth_name);
  g.cell_size_m = textio::parse_real(tok[3]);
  g.origin_x = textio::parse_real(tok[4]);
  g.origin_y = textio::parse_real(tok[5]);
  try {
    g.validate();
  } catch (const data_error& e) {
    throw parse_error(std::string("malformed header: ") + e.what());
  }
  return g;
}

std::string value_token(std::optional<double> v) { return v ? textio::format_real(*v) : "NA"; }

void check_magic(textio::line_reader& lines, std::string_view magic) {
  std::string line = lines.expect("magic line");
  if (textio::trim(line) != magic)
    throw parse_error("malformed header: expected '" + std::string(magic) + "'");
}

}  // namespace

void write_cube(const data_cube& cube, std::ostream& out) {
  const auto& g = cube.grid();
  out << kCubeMagic << '\n';
  write_spatial_dims(out, g.space, g.n_epochs());
  out << variable_name(cube.var()) << '\n';
  for (std::size_t t = 0; t < g.n_epochs(); ++t) out << (t ? " " : "") << g.epochs[t].iso();
  out << '\n';
  for (std::size_t cell = 0; cell < cube.n_cells(); ++cell) {
    for (std::size_t t = 0; t < g.n_epochs(); ++t) out << (t ? " " : "") << value_token(cube.get(cell, t));
    out << '\n';
  }
}

void write_cube(const data_cube& cube, const std::filesystem::path& path) {
  auto out = textio::open_output(path);
  write_cube(cube, out);
  textio::finish_output(out, path);
}

data_cube read_cube(std::istream& in) {
  textio::line_reader lines(in);
  check_magic(lines, kCubeMagic);
  std::size_t n_epochs = 0;
  std::string dims = lines.expect("dims line");
  space_time_grid grid;
  grid.space = read_spatial_dims(textio::split_ws(dims), n_epochs, "epochs");
  variable var = parse_variable(textio::trim(lines.expect("variable line")));
  std::string date_line = lines.expect("date line");
  auto date_tok = textio::split_ws(date_line);
  if (date_tok.size() != n_epochs)
    throw parse_error("dimension mismatch: header declares " + std::to_string(n_epochs) + " epochs but " +
                      std::to_string(date_tok.size()) + " dates are listed");
  for (auto d : date_tok) grid.epochs.push_back(date::parse(d));
  for (std::size_t i = 1; i < grid.epochs.size(); ++i)
    if (!(grid.epochs[i - 1] < grid.epochs[i]))
      throw parse_error("non-increasing dates: " + grid.epochs[i - 1].iso() + ", " + grid.epochs[i].iso());

  data_cube cube(grid, var);
  const std::size_t expected = cube.n_cells() * n_epochs;
  textio::token_reader tokens(in);
  std::string tok;
  std::size_t k = 0;
  while (tokens.next(tok)) {
    if (k >= expected)
      throw parse_error("dimension mismatch: more than the declared " + std::to_string(expected) +
                        " data tokens");
    std::size_t cell = k / n_epochs, t = k % n_epochs;
    if (tok == "NA")
      cube.mask(cell, t);
    else
      cube.set(cell, t, textio::parse_real(tok));
    ++k;
  }
  if (k != expected)
    throw parse_error("dimension mismatch: header declares " + std::to_string(expected) + " data tokens, found " +
                      std::to_string(k));
  return cube;
}

data_cube read_cube(const std::filesystem::path& path) {
  auto in = textio::open_input(path);
  return read_cube(in);
}

void write_texture(const texture_stack& tex, std::ostream& out) {
  const auto& g = tex.grid();
  out << kTextureMagic << '\n';
  write_spatial_dims(out, g, texture_stack::n_layers);
  for (std::size_t l = 0; l < texture_stack::n_layers; ++l) {
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        std::size_t cell = g.cell_id(r, c);
        out << (c ? " " : "") << (tex.defined(cell, l) ? textio::format_real(tex.at(cell, l)) : "NA");
      }
      out << '\n';
    }
  }
}

void write_texture(const texture_stack& tex, const std::filesystem::path& path) {
  auto out = textio::open_output(path);
  write_texture(tex, out);
  textio::finish_output(out, path);
}

texture_stack read_texture(std::istream& in) {
  textio::line_reader lines(in);
  check_magic(lines, kTextureMagic);
  std::size_t layers = 0;
  std::string dims = lines.expect("dims line");
  spatial_grid g = read_spatial_dims(textio::split_ws(dims), layers, "layers");
  if (layers != texture_stack::n_layers)
    throw parse_error("texture must have exactly 10 layers, header declares " + std::to_string(layers));
  texture_stack tex(g);
  const std::size_t expected = g.cells() * layers;
  textio::token_reader tokens(in);
  std::string tok;
  std::size_t k = 0;
  while (tokens.next(tok)) {
    if (k >= expected) throw parse_error("dimension mismatch: extra texture tokens");
    std::size_t layer = k / g.cells(), cell = k % g.cells();
    if (tok != "NA") {
      double v = textio::parse_real(tok);
      if (!(v >= 0.0 && v <= 100.0)) throw parse_error("texture value out of [0, 100]: " + tok);
      tex.set(cell, layer, v);
    }
    ++k;
  }
  if (k != expected)
    throw parse_error("dimension mismatch: header declares " + std::to_string(expected) + " texture tokens, found " +
                      std::to_string(k));
  return tex;
}

texture_stack read_texture(const std::filesystem::path& path) {
  auto in = textio::open_input(path);
  return read_texture(in);
}

std::string samples_header(std::size_t n_features, std::size_t n_targets) {
  std::string h = "cell_id,x_m,y_m";
  char buf[32];
  for (std::size_t j = 0; j < n_features; ++j) {
    std::snprintf(buf, sizeof buf, ",f%03zu", j + 1);
    h += buf;
  }
  for (std::size_t j = 0; j < n_targets; ++j) {
    std::snprintf(buf, sizeof buf, ",t%02zu", j + 1);
    h += buf;
  }
  return h;
}

void write_samples(const sample_table& table, std::ostream& out) {
  out << samples_header(table.n_features(), table.n_targets()) << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.cell_id(i) << ',' << textio::format_real(table.x(i)) << ',' << textio::format_real(table.y(i));
    for (double v : table.features(i)) out << ',' << textio::format_real(v);
    for (double v : table.targets(i)) out << ',' << textio::format_real(v);
    out << '\n';
  }
}

void write_samples(const sample_table& table, const std::filesystem::path& path) {
  auto out = textio::open_output(path);
  write_samples(table, out);
  textio::finish_output(out, path);
}

sample_table read_samples(std::istream& in) {
  textio::line_reader lines(in);
  std::string header = lines.expect("CSV header");
  auto cols = textio::split(header, ',');
  std::size_t n_targets = 0;
  while (n_targets < cols.size() && !cols[cols.size() - 1 - n_targets].empty() &&
         cols[cols.size() - 1 - n_targets][0] == 't')
    ++n_targets;
  if (cols.size() < 3 + n_targets || n_targets == 0)
    throw parse_error("header mismatch: expected cell_id,x_m,y_m,f...,t...");
  std::size_t n_features = cols.size() - 3 - n_targets;
  if (header != samples_header(n_features, n_targets))
    throw parse_error("header mismatch: expected '" + samples_header(n_features, n_targets).substr(0, 40) +
                      "...'");
  sample_table table(n_features, n_targets);
  std::vector<double> f(n_features), t(n_targets);
  std::string line;
  while (lines.next(line)) {
    if (textio::trim(line).empty()) continue;
    auto tok = textio::split(line, ',');
    if (tok.size() != cols.size())
      throw parse_error("line " + std::to_string(lines.line_no()) + ": expected " + std::to_string(cols.size()) +
                        " fields, found " + std::to_string(tok.size()));
    try {
      long long id = textio::parse_int(tok[0]);
      double x = textio::parse_real(tok[1]);
      double y = textio::parse_real(tok[2]);
      for (std::size_t j = 0; j < n_features; ++j) f[j] = textio::parse_real(tok[3 + j]);
      for (std::size_t j = 0; j < n_targets; ++j) t[j] = textio::parse_real(tok[3 + n_features + j]);
      table.add_row(id, x, y, f, t);
    } catch (const data_error& e) {
      throw parse_error("line " + std::to_string(lines.line_no()) + ": " + e.what());
    }
  }
  return table;
}

sample_table read_samples(const std::filesystem::path& path) {
  auto in = textio::open_input(path);
  return read_samples(in);
}

}  // namespace subsight
