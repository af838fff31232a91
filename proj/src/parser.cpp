#include "hailgauge/parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

namespace hailgauge {

namespace {

bool is_letter(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view word) {
    if (pos + word.size() > s.size())
        return false;
    for (std::size_t i = 0; i < word.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[pos + i])) != word[i])
            return false;
    return true;
}

enum class Unit { none, cm, mm };

// Unit word starting exactly at `pos`, with no letter directly after the abbreviation.
Unit unit_at(std::string_view s, std::size_t pos) {
    auto abbreviation = [&](std::string_view word) {
        return starts_with_ci(s, pos, word) && (pos + word.size() >= s.size() || !is_letter(s[pos + word.size()]));
    };
    if (abbreviation("mm") || starts_with_ci(s, pos, "millimet"))
        return Unit::mm;
    if (abbreviation("cm") || starts_with_ci(s, pos, "centimet"))
        return Unit::cm;
    return Unit::none;
}

} // namespace

std::optional<double> extract_first_number(std::string_view s, bool convert_mm) {
    const std::size_t n = s.size();
    std::size_t i = 0;
    while (i < n) {
        if (!is_digit(s[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < n && is_digit(s[i]))
            ++i;
        std::string literal(s.substr(start, i - start));
        if (i + 1 < n && (s[i] == '.' || s[i] == ',') && is_digit(s[i + 1])) {
            literal += '.';
            ++i;
            std::size_t frac = i;
            while (i < n && is_digit(s[i]))
                ++i;
            literal += s.substr(frac, i - frac);
        }
        const std::size_t end = i;

        bool leading_point = start >= 1 && s[start - 1] == '.' && (start < 2 || !is_digit(s[start - 2]));
        std::size_t lead = leading_point ? start - 1 : start;

        bool rejected = false;
        if (lead >= 1 && is_letter(s[lead - 1]))
            rejected = true;
        if (lead >= 2 && s[lead - 1] == '-' && is_letter(s[lead - 2]))
            rejected = true;
        if (end < n && is_letter(s[end]) && unit_at(s, end) == Unit::none)
            rejected = true;
        if (end + 1 < n && s[end] == '-' && is_letter(s[end + 1]))
            rejected = true;

        if (rejected) {
            while (i < n && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == ','))
                ++i;
            continue;
        }

        if (leading_point)
            literal = "0." + literal;
        double value = 0.0;
        std::from_chars(literal.data(), literal.data() + literal.size(), value);

        bool negative = lead >= 1 && s[lead - 1] == '-' &&
                        (lead < 2 || !std::isalnum(static_cast<unsigned char>(s[lead - 2])));
        if (negative)
            value = -value;

        std::size_t unit_pos = end;
        while (unit_pos < n && (s[unit_pos] == ' ' || s[unit_pos] == '\t'))
            ++unit_pos;
        if (convert_mm && unit_at(s, unit_pos) == Unit::mm)
            value /= 10.0;
        return value;
    }
    return std::nullopt;
}

double round_to_half_cm(double v) {
    return std::floor(v * 2.0 + 0.5) / 2.0;
}

std::string_view to_string(MissReason r) {
    switch (r) {
    case MissReason::none: return "none";
    case MissReason::no_number: return "no_number";
    case MissReason::out_of_range: return "out_of_range";
    case MissReason::provider_failure: return "provider_failure";
    }
    return "none";
}

std::optional<MissReason> parse_miss_reason(std::string_view token) {
    for (auto r : {MissReason::none, MissReason::no_number, MissReason::out_of_range, MissReason::provider_failure})
        if (to_string(r) == token)
            return r;
    return std::nullopt;
}

nlohmann::json measurement_to_json(const Measurement& m) {
    nlohmann::ordered_json j;
    j["sample_id"] = m.sample_id;
    j["model_id"] = m.model_id;
    j["strategy"] = std::string(to_string(m.strategy));
    j["value_cm_raw"] = m.value_cm_raw ? nlohmann::ordered_json(*m.value_cm_raw) : nlohmann::ordered_json();
    j["value_cm_rounded"] =
        m.value_cm_rounded ? nlohmann::ordered_json(*m.value_cm_rounded) : nlohmann::ordered_json();
    j["miss"] = m.miss;
    j["miss_reason"] = std::string(to_string(m.miss_reason));
    return j;
}

Measurement measurement_from_json(const nlohmann::json& j) {
    Measurement m;
    m.sample_id = j.at("sample_id").get<std::string>();
    m.model_id = j.at("model_id").get<std::string>();
    auto s = parse_strategy(j.at("strategy").get<std::string>());
    if (!s)
        throw Error("measurement has invalid strategy");
    m.strategy = *s;
    if (!j.at("value_cm_raw").is_null())
        m.value_cm_raw = j.at("value_cm_raw").get<double>();
    if (!j.at("value_cm_rounded").is_null())
        m.value_cm_rounded = j.at("value_cm_rounded").get<double>();
    m.miss = j.at("miss").get<bool>();
    auto r = parse_miss_reason(j.at("miss_reason").get<std::string>());
    if (!r)
        throw Error("measurement has invalid miss_reason");
    m.miss_reason = *r;
    return m;
}

Measurement to_measurement(const StrategyTrace& trace, const std::string& model_id, const ParserOptions& options) {
    Measurement m;
    m.sample_id = trace.sample_id;
    m.model_id = model_id;
    m.strategy = trace.strategy;

    if (trace.step2_status != OutcomeStatus::ok || !trace.step2_raw) {
        m.miss_reason = MissReason::provider_failure;
        return m;
    }
    auto value = extract_first_number(*trace.step2_raw, options.convert_mm);
    if (!value) {
        m.miss_reason = MissReason::no_number;
        return m;
    }
    if (options.range_gate && (*value <= 0.0 || *value > options.max_cm)) {
        m.miss_reason = MissReason::out_of_range;
        return m;
    }
    m.value_cm_raw = *value;
    m.value_cm_rounded = round_to_half_cm(*value);
    m.miss = false;
    m.miss_reason = MissReason::none;
    return m;
}

} // namespace hailgauge
