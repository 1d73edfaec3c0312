#include "subsight/dates.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "subsight/error.hpp"

namespace subsight {

namespace {

std::chrono::year_month_day to_ymd(int days) {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
}

}  // namespace

date date::from_ymd(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                  std::chrono::day{day}};
  if (!ymd.ok()) throw parse_error("invalid calendar date");
  return date(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

date date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
    throw parse_error("expected YYYY-MM-DD date, got '" + std::string(iso) + "'");
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, v);
    if (ec != std::errc() || p != iso.data() + pos + len)
      throw parse_error("expected YYYY-MM-DD date, got '" + std::string(iso) + "'");
    return v;
  };
  int y = field(0, 4), m = field(5, 2), d = field(8, 2);
  if (m < 1 || d < 1) throw parse_error("invalid calendar date '" + std::string(iso) + "'");
  try {
    return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  } catch (const parse_error&) {
    throw parse_error("invalid calendar date '" + std::string(iso) + "'");
  }
}

int date::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned date::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned date::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

int date::day_of_year() const {
  return days_ - from_ymd(year(), 1, 1).days();
}

std::string date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

}  // namespace subsight
