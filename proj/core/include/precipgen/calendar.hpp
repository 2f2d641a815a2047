#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace precipgen {

using CivilDate = std::chrono::year_month_day;

/// Parses YYYY-MM-DD. Throws DataError on anything else.
CivilDate parse_date(std::string_view text);
std::string format_date(const CivilDate& date);

bool is_leap_year(int year);
int days_in_year(int year);

/// Contiguous span of civil days [start, end], both inclusive. Leap days are
/// ordinary days of the span.
class Calendar {
public:
    Calendar() = default;
    Calendar(CivilDate start, CivilDate end);

    /// Convenience for whole years: Jan 1 of first_year to Dec 31 of last_year.
    static Calendar years(int first_year, int last_year);

    [[nodiscard]] const CivilDate& start() const noexcept { return start_; }
    [[nodiscard]] const CivilDate& end() const noexcept { return end_; }
    [[nodiscard]] std::size_t day_count() const noexcept { return day_count_; }

    [[nodiscard]] CivilDate date(std::size_t day) const;
    [[nodiscard]] int year(std::size_t day) const;
    /// 1..12
    [[nodiscard]] int month(std::size_t day) const;
    /// 1..366
    [[nodiscard]] int day_of_year(std::size_t day) const;

    /// Index of a date within the span, or npos when outside.
    [[nodiscard]] std::size_t index_of(const CivilDate& date) const noexcept;

    [[nodiscard]] int first_year() const noexcept { return static_cast<int>(start_.year()); }
    [[nodiscard]] int last_year() const noexcept { return static_cast<int>(end_.year()); }
    [[nodiscard]] int year_count() const noexcept { return last_year() - first_year() + 1; }

    /// True when the span covers every day of `year`.
    [[nodiscard]] bool covers_full_year(int year) const noexcept;

    /// Day indices [first, last) belonging to `year` within the span (may be empty).
    [[nodiscard]] std::pair<std::size_t, std::size_t> year_range(int year) const noexcept;

    friend bool operator==(const Calendar& a, const Calendar& b) noexcept {
        return a.start_ == b.start_ && a.end_ == b.end_;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    CivilDate start_{};
    CivilDate end_{};
    std::size_t day_count_ = 0;
    // Cached per-day accessors; the span is small (decades of days).
    std::vector<short> year_;
    std::vector<unsigned char> month_;
    std::vector<short> doy_;
};

} // namespace precipgen
