#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace subsight::textio {

// Shortest decimal that parses back to the same double. Integral values
// keep a trailing ".0" so tokens always read as reals.
std::string format_real(double v);

std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);
// Throws data_error if the stream went bad while writing `path`.
void finish_output(std::ofstream& out, const std::filesystem::path& path);

// Strict parse of the whole token; throws parse_error.
double parse_real(std::string_view token);
long long parse_int(std::string_view token);
std::uint64_t parse_uint(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char sep);
std::vector<std::string_view> split_ws(std::string_view line);
std::string_view trim(std::string_view s);

// Line reader that remembers the 1-based number of the last line returned.
class line_reader {
 public:
  explicit line_reader(std::istream& in) : in_(in) {}
  bool next(std::string& line);
  // Next line or a parse_error naming `what`.
  std::string expect(std::string_view what);
  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

// Whitespace-separated token stream spanning lines.
class token_reader {
 public:
  explicit token_reader(std::istream& in) : in_(in) {}
  bool next(std::string& tok);
  std::string expect(std::string_view what);

 private:
  std::istream& in_;
};

}  // namespace subsight::textio
