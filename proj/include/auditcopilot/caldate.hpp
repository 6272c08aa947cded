#pragma once
#include <chrono>
#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace auditcopilot {

// Calendar date (no timezone; ledger dates are plain civil dates).
struct CalDate {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                           std::chrono::day{day}};
    }

    bool valid() const { return ymd().ok(); }

    // Days since the civil epoch; basis for date arithmetic and ordering.
    int serial() const {
        return std::chrono::sys_days{ymd()}.time_since_epoch().count();
    }

    // ISO weekday, 1 = Monday .. 7 = Sunday.
    unsigned weekday_iso() const {
        return std::chrono::weekday{std::chrono::sys_days{ymd()}}.iso_encoding();
    }

    bool is_saturday() const { return weekday_iso() == 6; }
    bool is_sunday() const { return weekday_iso() == 7; }
    bool is_weekend() const { return weekday_iso() >= 6; }

    CalDate plus_days(int days) const {
        std::chrono::sys_days sd = std::chrono::sys_days{ymd()} + std::chrono::days{days};
        std::chrono::year_month_day out{sd};
        return CalDate{int(out.year()), unsigned(out.month()), unsigned(out.day())};
    }

    friend bool operator==(const CalDate& a, const CalDate& b) {
        return a.year == b.year && a.month == b.month && a.day == b.day;
    }
    friend auto operator<=>(const CalDate& a, const CalDate& b) {
        return a.serial() <=> b.serial();
    }
};

inline CalDate parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw std::invalid_argument("date must be YYYY-MM-DD");
    auto digits = [&](size_t from, size_t n) {
        int v = 0;
        for (size_t i = from; i < from + n; ++i) {
            if (text[i] < '0' || text[i] > '9') throw std::invalid_argument("date must be YYYY-MM-DD");
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    CalDate d{digits(0, 4), static_cast<unsigned>(digits(5, 2)), static_cast<unsigned>(digits(8, 2))};
    if (!d.valid()) throw std::invalid_argument("invalid calendar date: " + std::string(text));
    return d;
}

inline std::string format_date(const CalDate& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

// Time of day at minutes resolution, stored as minutes since midnight.
inline int parse_time_minutes(std::string_view text) {
    if (text.size() != 5 || text[2] != ':')
        throw std::invalid_argument("time must be HH:MM");
    auto two = [&](size_t from) {
        if (text[from] < '0' || text[from] > '9' || text[from + 1] < '0' || text[from + 1] > '9')
            throw std::invalid_argument("time must be HH:MM");
        return (text[from] - '0') * 10 + (text[from + 1] - '0');
    };
    int h = two(0), m = two(3);
    if (h > 23 || m > 59) throw std::invalid_argument("time out of range: " + std::string(text));
    return h * 60 + m;
}

inline std::string format_time_minutes(int minutes) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

}  // namespace auditcopilot
