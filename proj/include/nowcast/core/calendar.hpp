#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "nowcast/core/errors.hpp"

namespace nowcast {

/// Proleptic Gregorian calendar date. Value type, totally ordered.
struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  friend auto operator<=>(const Date&, const Date&) = default;

  // days since 1970-01-01 (Howard Hinnant's civil-days algorithm)
  [[nodiscard]] std::int64_t to_days() const {
    const int y = year - (month <= 2);
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        (153u * static_cast<unsigned>(month + (month > 2 ? -3 : 9)) + 2u) / 5u +
        static_cast<unsigned>(day) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
  }

  static Date from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
  }

  [[nodiscard]] Date plus_days(std::int64_t n) const { return from_days(to_days() + n); }

  static bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

  static int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> len{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : len[static_cast<std::size_t>(m - 1)];
  }

  [[nodiscard]] bool valid() const {
    return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
  }

  [[nodiscard]] std::string str() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  // ISO-8601 YYYY-MM-DD
  static std::optional<Date> parse(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    Date d;
    if (!parse_int(s.substr(0, 4), d.year) || !parse_int(s.substr(5, 2), d.month) ||
        !parse_int(s.substr(8, 2), d.day))
      return std::nullopt;
    if (!d.valid()) return std::nullopt;
    return d;
  }

  static Date parse_or_throw(std::string_view s) {
    auto d = parse(s);
    if (!d) throw ValidationError("malformed date: '" + std::string(s) + "' (expected YYYY-MM-DD)");
    return *d;
  }

 private:
  static bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    out = v;
    return true;
  }
};

enum class Frequency { monthly, quarterly };

inline std::string to_string(Frequency f) { return f == Frequency::monthly ? "monthly" : "quarterly"; }

inline std::optional<Frequency> frequency_from_string(std::string_view s) {
  if (s == "monthly") return Frequency::monthly;
  if (s == "quarterly") return Frequency::quarterly;
  return std::nullopt;
}

/// Calendar period: a month ("2020-03") or a quarter ("2020-Q1").
struct Period {
  Frequency freq = Frequency::quarterly;
  int year = 1970;
  int index = 1;  // month 1..12 or quarter 1..4

  friend auto operator<=>(const Period&, const Period&) = default;

  [[nodiscard]] int units_per_year() const { return freq == Frequency::monthly ? 12 : 4; }

  // periods since year 0, used for arithmetic
  [[nodiscard]] std::int64_t ordinal() const {
    return static_cast<std::int64_t>(year) * units_per_year() + (index - 1);
  }

  [[nodiscard]] Period plus(std::int64_t n) const {
    const int upy = units_per_year();
    std::int64_t o = ordinal() + n;
    std::int64_t y = o >= 0 ? o / upy : -((-o + upy - 1) / upy);
    return Period{freq, static_cast<int>(y), static_cast<int>(o - y * upy) + 1};
  }

  [[nodiscard]] Period next() const { return plus(1); }
  [[nodiscard]] Period prev() const { return plus(-1); }

  /// Signed distance in periods; both operands must share a frequency.
  [[nodiscard]] std::int64_t minus(const Period& other) const {
    if (freq != other.freq) throw ValidationError("period difference across frequencies");
    return ordinal() - other.ordinal();
  }

  [[nodiscard]] Date first_date() const {
    const int m = freq == Frequency::monthly ? index : (index - 1) * 3 + 1;
    return Date{year, m, 1};
  }

  [[nodiscard]] Date last_date() const {
    const int m = freq == Frequency::monthly ? index : index * 3;
    return Date{year, m, Date::days_in_month(year, m)};
  }

  [[nodiscard]] std::string str() const {
    char buf[32];
    if (freq == Frequency::monthly)
      std::snprintf(buf, sizeof(buf), "%04d-%02d", year, index);
    else
      std::snprintf(buf, sizeof(buf), "%04d-Q%d", year, index);
    return buf;
  }

  static std::optional<Period> parse(std::string_view s) {
    Period p;
    if (s.size() == 7 && s[4] == '-' && (s[5] == 'Q' || s[5] == 'q')) {
      p.freq = Frequency::quarterly;
      if (!parse_int(s.substr(0, 4), p.year) || !parse_int(s.substr(6, 1), p.index)) return std::nullopt;
      if (p.index < 1 || p.index > 4) return std::nullopt;
      return p;
    }
    if (s.size() == 7 && s[4] == '-') {
      p.freq = Frequency::monthly;
      if (!parse_int(s.substr(0, 4), p.year) || !parse_int(s.substr(5, 2), p.index)) return std::nullopt;
      if (p.index < 1 || p.index > 12) return std::nullopt;
      return p;
    }
    return std::nullopt;
  }

  static Period parse_or_throw(std::string_view s) {
    auto p = parse(s);
    if (!p)
      throw ValidationError("malformed period: '" + std::string(s) + "' (expected YYYY-MM or YYYY-Qn)");
    return *p;
  }

  static Period month_of(const Date& d) { return Period{Frequency::monthly, d.year, d.month}; }
  static Period quarter_of(const Date& d) {
    return Period{Frequency::quarterly, d.year, (d.month - 1) / 3 + 1};
  }

  /// Quarter containing this period (identity for quarterly periods).
  [[nodiscard]] Period containing_quarter() const {
    if (freq == Frequency::quarterly) return *this;
    return Period{Frequency::quarterly, year, (index - 1) / 3 + 1};
  }

 private:
  static bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    out = v;
    return true;
  }
};

}  // namespace nowcast
