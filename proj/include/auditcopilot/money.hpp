#pragma once
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace auditcopilot {

// Amounts are scaled-integer cents so ledger balance checks are exact.
// Floating point is only introduced downstream (features, statistics).

// Parses a decimal currency literal ("123", "123.4", "123.45") into cents.
// Accepts an optional sign; range/sign policy is enforced by the caller.
inline int64_t parse_amount_cents(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("empty amount");
    size_t i = 0;
    bool negative = false;
    if (text[0] == '-' || text[0] == '+') {
        negative = text[0] == '-';
        i = 1;
    }
    if (i >= text.size()) throw std::invalid_argument("amount has no digits");

    int64_t units = 0;
    size_t digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        if (units > (INT64_MAX - 9) / 10) throw std::invalid_argument("amount out of range");
        units = units * 10 + (text[i] - '0');
        ++i;
        ++digits;
    }
    if (digits == 0) throw std::invalid_argument("amount has no integer digits");

    int64_t cents = 0;
    if (i < text.size()) {
        if (text[i] != '.') throw std::invalid_argument("unexpected character in amount");
        ++i;
        size_t frac_digits = text.size() - i;
        if (frac_digits == 0 || frac_digits > 2)
            throw std::invalid_argument("amount must have 1 or 2 decimal digits");
        for (; i < text.size(); ++i) {
            if (text[i] < '0' || text[i] > '9')
                throw std::invalid_argument("unexpected character in amount");
            cents = cents * 10 + (text[i] - '0');
        }
        if (frac_digits == 1) cents *= 10;
    }
    if (units > (INT64_MAX - cents) / 100) throw std::invalid_argument("amount out of range");
    int64_t total = units * 100 + cents;
    return negative ? -total : total;
}

// Renders cents as a two-decimal currency literal, e.g. 12345 -> "123.45".
inline std::string format_cents(int64_t cents) {
    bool negative = cents < 0;
    uint64_t mag = negative ? 0ULL - static_cast<uint64_t>(cents) : static_cast<uint64_t>(cents);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%llu.%02llu", negative ? "-" : "",
                  static_cast<unsigned long long>(mag / 100),
                  static_cast<unsigned long long>(mag % 100));
    return buf;
}

// Half-up integer division for non-negative operands.
inline int64_t div_half_up(int64_t numerator, int64_t denominator) {
    return (2 * numerator + denominator) / (2 * denominator);
}

}  // namespace auditcopilot
