#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "hailgauge/prompts.hpp"
#include "hailgauge/types.hpp"

namespace hailgauge {

struct ParserOptions {
    bool convert_mm = true;  // "40 mm" -> 4.0
    bool range_gate = true;  // values outside (0, max_cm] become out_of_range misses
    double max_cm = 50.0;
};

/// First numeric literal in the text, in cm.
///
/// Integers and decimals with '.' or ',' separators qualify. A numeral touching a letter or a
/// hyphen-letter pair is not a value ("GPT-4o", "P2"), except for a directly attached unit
/// ("4.5cm", "40mm"). With `convert_mm`, a millimetre unit divides the value by ten.
std::optional<double> extract_first_number(std::string_view text, bool convert_mm = true);

/// Nearest multiple of 0.5; exact quarter midpoints round up.
double round_to_half_cm(double v);

enum class MissReason { none, no_number, out_of_range, provider_failure };

std::string_view to_string(MissReason r);
std::optional<MissReason> parse_miss_reason(std::string_view token);

struct Measurement {
    std::string sample_id;
    std::string model_id;
    Strategy strategy = Strategy::P1;
    std::optional<double> value_cm_raw;
    std::optional<double> value_cm_rounded;
    bool miss = true;
    MissReason miss_reason = MissReason::no_number;

    bool operator==(const Measurement&) const = default;
};

nlohmann::json measurement_to_json(const Measurement& m);
Measurement measurement_from_json(const nlohmann::json& j);

/// Interprets the final step of a trace.
Measurement to_measurement(const StrategyTrace& trace, const std::string& model_id,
                           const ParserOptions& options = {});

} // namespace hailgauge
