#include "precipgen/calendar.hpp"

#include "precipgen/error.hpp"

#include <charconv>
#include <cstdio>

namespace precipgen {

namespace chr = std::chrono;

namespace {

int parse_int(std::string_view s, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError("invalid date '" + std::string(whole) + "'");
    }
    return value;
}

} // namespace

CivilDate parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw DataError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    CivilDate date{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
    if (!date.ok()) {
        throw DataError("invalid date '" + std::string(text) + "'");
    }
    return date;
}

std::string format_date(const CivilDate& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

bool is_leap_year(int year) { return chr::year{year}.is_leap(); }

int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

Calendar::Calendar(CivilDate start, CivilDate end) : start_(start), end_(end) {
    if (!start.ok() || !end.ok()) {
        throw DataError("calendar bounds are not valid civil dates");
    }
    const auto first = chr::sys_days{start};
    const auto last = chr::sys_days{end};
    if (last < first) {
        throw DataError("calendar end " + format_date(end) + " precedes start " + format_date(start));
    }
    day_count_ = static_cast<std::size_t>((last - first).count()) + 1;
    year_.resize(day_count_);
    month_.resize(day_count_);
    doy_.resize(day_count_);
    for (std::size_t t = 0; t < day_count_; ++t) {
        const auto day = first + chr::days{static_cast<long>(t)};
        const CivilDate ymd{day};
        const auto jan1 = chr::sys_days{ymd.year() / chr::January / 1};
        year_[t] = static_cast<short>(static_cast<int>(ymd.year()));
        month_[t] = static_cast<unsigned char>(static_cast<unsigned>(ymd.month()));
        doy_[t] = static_cast<short>((day - jan1).count() + 1);
    }
}

Calendar Calendar::years(int first_year, int last_year) {
    return Calendar{chr::year{first_year} / chr::January / 1, chr::year{last_year} / chr::December / 31};
}

CivilDate Calendar::date(std::size_t day) const {
    return CivilDate{chr::sys_days{start_} + chr::days{static_cast<long>(day)}};
}

int Calendar::year(std::size_t day) const { return year_.at(day); }
int Calendar::month(std::size_t day) const { return month_.at(day); }
int Calendar::day_of_year(std::size_t day) const { return doy_.at(day); }

std::size_t Calendar::index_of(const CivilDate& date) const noexcept {
    if (!date.ok() || day_count_ == 0) {
        return npos;
    }
    const auto offset = (chr::sys_days{date} - chr::sys_days{start_}).count();
    if (offset < 0 || static_cast<std::size_t>(offset) >= day_count_) {
        return npos;
    }
    return static_cast<std::size_t>(offset);
}

bool Calendar::covers_full_year(int year) const noexcept {
    const auto [first, last] = year_range(year);
    return last - first == static_cast<std::size_t>(days_in_year(year));
}

std::pair<std::size_t, std::size_t> Calendar::year_range(int year) const noexcept {
    if (day_count_ == 0 || year < first_year() || year > last_year()) {
        return {0, 0};
    }
    const CivilDate jan1 = chr::year{year} / chr::January / 1;
    const CivilDate dec31 = chr::year{year} / chr::December / 31;
    const std::size_t first = year == first_year() ? 0 : index_of(jan1);
    const std::size_t last = year == last_year() ? day_count_ : index_of(dec31) + 1;
    return {first, last};
}

} // namespace precipgen
