#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hailgauge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using UtcTime = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DDTHH:MM[:SS][Z]" and the same with a space separator.
std::optional<UtcTime> parse_utc(std::string_view text);
std::string format_utc(UtcTime t);
UtcTime utc_now();

/// Scale-cue taxonomy used for stratified error analysis.
enum class ReferenceClass {
    hand,
    coin_or_bottle_cap,
    ruler,
    small_household_object,
    fruit,
    unspecified_or_other,
};

inline constexpr std::array kReferenceClasses = {
    ReferenceClass::hand,
    ReferenceClass::coin_or_bottle_cap,
    ReferenceClass::ruler,
    ReferenceClass::small_household_object,
    ReferenceClass::fruit,
    ReferenceClass::unspecified_or_other,
};

enum class DistanceClass { close_up, distant };

inline constexpr std::array kDistanceClasses = {DistanceClass::close_up, DistanceClass::distant};

enum class Strategy { P1, P2 };

enum class OutcomeStatus { ok, transport_error, provider_rejection, timeout };

std::string_view to_string(ReferenceClass c);
std::string_view to_string(DistanceClass c);
std::string_view to_string(Strategy s);
std::string_view to_string(OutcomeStatus s);

std::optional<ReferenceClass> parse_reference_class(std::string_view token);
std::optional<DistanceClass> parse_distance_class(std::string_view token);
std::optional<Strategy> parse_strategy(std::string_view token);
std::optional<OutcomeStatus> parse_outcome_status(std::string_view token);

// Shortest decimal text that round-trips the double.
std::string format_double(double v);

} // namespace hailgauge
