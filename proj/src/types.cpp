#include "hailgauge/types.hpp"

#include <charconv>
#include <cstdio>

#include <fmt/format.h>

namespace hailgauge {

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty())
        return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

std::optional<UtcTime> parse_utc(std::string_view text) {
    using namespace std::chrono;
    if (!text.empty() && (text.back() == 'Z' || text.back() == 'z'))
        text.remove_suffix(1);
    // YYYY-MM-DD?HH:MM[:SS]
    if (text.size() != 16 && text.size() != 19)
        return std::nullopt;
    if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
        return std::nullopt;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
        !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), h) ||
        !parse_int(text.substr(14, 2), mi))
        return std::nullopt;
    if (text.size() == 19) {
        if (text[16] != ':' || !parse_int(text.substr(17, 2), s))
            return std::nullopt;
    }
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60 || h < 0 || mi < 0 || s < 0)
        return std::nullopt;
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_utc(UtcTime t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                       hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

UtcTime utc_now() {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

std::string_view to_string(ReferenceClass c) {
    switch (c) {
    case ReferenceClass::hand: return "hand";
    case ReferenceClass::coin_or_bottle_cap: return "coin_or_bottle_cap";
    case ReferenceClass::ruler: return "ruler";
    case ReferenceClass::small_household_object: return "small_household_object";
    case ReferenceClass::fruit: return "fruit";
    case ReferenceClass::unspecified_or_other: return "unspecified_or_other";
    }
    return "unspecified_or_other";
}

std::string_view to_string(DistanceClass c) {
    return c == DistanceClass::close_up ? "close_up" : "distant";
}

std::string_view to_string(Strategy s) {
    return s == Strategy::P1 ? "P1" : "P2";
}

std::string_view to_string(OutcomeStatus s) {
    switch (s) {
    case OutcomeStatus::ok: return "ok";
    case OutcomeStatus::transport_error: return "transport_error";
    case OutcomeStatus::provider_rejection: return "provider_rejection";
    case OutcomeStatus::timeout: return "timeout";
    }
    return "transport_error";
}

std::optional<ReferenceClass> parse_reference_class(std::string_view token) {
    for (auto c : kReferenceClasses)
        if (to_string(c) == token)
            return c;
    return std::nullopt;
}

std::optional<DistanceClass> parse_distance_class(std::string_view token) {
    for (auto c : kDistanceClasses)
        if (to_string(c) == token)
            return c;
    return std::nullopt;
}

std::optional<Strategy> parse_strategy(std::string_view token) {
    if (token == "P1" || token == "p1")
        return Strategy::P1;
    if (token == "P2" || token == "p2")
        return Strategy::P2;
    return std::nullopt;
}

std::optional<OutcomeStatus> parse_outcome_status(std::string_view token) {
    for (auto s : {OutcomeStatus::ok, OutcomeStatus::transport_error, OutcomeStatus::provider_rejection,
                   OutcomeStatus::timeout})
        if (to_string(s) == token)
            return s;
    return std::nullopt;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{})
        return fmt::format("{}", v);
    return std::string(buf, ptr);
}

} // namespace hailgauge
