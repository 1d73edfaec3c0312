#include "subsight/textio.hpp"

#include <charconv>
#include <cmath>

#include "subsight/error.hpp"

namespace subsight::textio {

std::string format_real(double v) {
  if (!std::isfinite(v)) throw data_error("cannot serialize non-finite value");
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw data_error("number formatting failed");
  std::string s(buf, p);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open for reading: " + path.string());
  return in;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw data_error("write failed: " + path.string());
}

double parse_real(std::string_view token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last || token.empty() || !std::isfinite(v))
    throw parse_error("not a number: '" + std::string(token) + "'");
  return v;
}

long long parse_int(std::string_view token) {
  long long v = 0;
  auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || p != token.data() + token.size() || token.empty())
    throw parse_error("not an integer: '" + std::string(token) + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view token) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || p != token.data() + token.size() || token.empty())
    throw parse_error("not an unsigned integer: '" + std::string(token) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool line_reader::next(std::string& line) {
  if (!std::getline(in_, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_no_;
  return true;
}

std::string line_reader::expect(std::string_view what) {
  std::string line;
  if (!next(line)) throw parse_error("unexpected end of file: missing " + std::string(what));
  return line;
}

bool token_reader::next(std::string& tok) { return static_cast<bool>(in_ >> tok); }

std::string token_reader::expect(std::string_view what) {
  std::string tok;
  if (!next(tok)) throw parse_error("unexpected end of file: missing " + std::string(what));
  return tok;
}

}  // namespace subsight::textio
