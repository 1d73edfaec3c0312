#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace subsight {

// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class date {
 public:
  constexpr date() = default;
  constexpr explicit date(int days_since_epoch) : days_(days_since_epoch) {}

  static date from_ymd(int year, unsigned month, unsigned day);
  // Strict YYYY-MM-DD.
  static date parse(std::string_view iso);

  constexpr int days() const { return days_; }
  int year() const;
  unsigned month() const;
  unsigned day() const;
  // 0-based day of year.
  int day_of_year() const;
  std::string iso() const;

  constexpr date operator+(int d) const { return date(days_ + d); }
  constexpr int operator-(date o) const { return days_ - o.days_; }
  constexpr auto operator<=>(const date&) const = default;

 private:
  int days_ = 0;
};

}  // namespace subsight
