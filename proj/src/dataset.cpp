#include "hailgauge/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hailgauge/csv.hpp"
#include "hailgauge/digest.hpp"

namespace hailgauge {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::optional<double> parse_decimal(std::string_view s) {
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    if (s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::vector<std::string> split_refs(std::string_view field) {
    std::vector<std::string> refs;
    std::size_t start = 0;
    while (start <= field.size()) {
        auto end = field.find(';', start);
        if (end == std::string_view::npos)
            end = field.size();
        auto ref = trim(field.substr(start, end - start));
        if (!ref.empty())
            refs.emplace_back(ref);
        start = end + 1;
    }
    return refs;
}

bool readable_file(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec))
        return false;
    std::ifstream in(p, std::ios::binary);
    return static_cast<bool>(in);
}

} // namespace

bool is_half_cm_multiple(double v) {
    double twice = v * 2.0;
    return std::isfinite(v) && std::abs(twice - std::round(twice)) < 1e-9;
}

bool is_remote_ref(std::string_view ref) {
    return ref.starts_with("http://") || ref.starts_with("https://");
}

std::string fetched_image_name(std::string_view url) {
    std::string_view path = url;
    if (auto q = path.find_first_of("?#"); q != std::string_view::npos)
        path = path.substr(0, q);
    std::string ext = ".img";
    if (auto dot = path.rfind('.'); dot != std::string_view::npos && path.find('/', dot) == std::string_view::npos) {
        std::string candidate(path.substr(dot));
        std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        static const std::set<std::string> kKnown = {".jpg", ".jpeg", ".png", ".webp", ".bmp", ".gif", ".tif", ".tiff"};
        if (kKnown.contains(candidate))
            ext = candidate;
    }
    return sha256_hex(url).substr(0, 24) + ext;
}

EventTable parse_events(std::istream& in) {
    csv::Record header;
    std::size_t line = 0;
    if (!csv::read_record(in, header, line))
        throw Error("event table is empty (no header row)");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF"))
        header[0].erase(0, 3);

    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i)
        column.emplace(std::string(trim(header[i])), i);
    std::vector<std::string> missing;
    for (auto name : kEventColumns)
        if (!column.contains(std::string(name)))
            missing.emplace_back(name);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing)
            list += (list.empty() ? "" : ", ") + m;
        throw Error("event table is missing mandatory column(s): " + list);
    }
    auto idx = [&](std::string_view name) { return column.at(std::string(name)); };

    EventTable table;
    std::unordered_set<std::string> seen;
    csv::Record rec;
    std::size_t row = 0;
    while (csv::read_record(in, rec, line)) {
        ++row;
        if (rec.size() == 1 && trim(rec[0]).empty())
            continue;
        auto field = [&](std::string_view name) -> std::string_view {
            auto i = idx(name);
            return i < rec.size() ? trim(rec[i]) : std::string_view{};
        };
        auto reject = [&](std::string reason) { table.rejects.push_back({row, std::move(reason)}); };

        HailEvent ev;
        ev.event_id = std::string(field("event_id"));
        if (ev.event_id.empty()) {
            reject("empty event_id");
            continue;
        }
        if (!seen.insert(ev.event_id).second)
            throw Error("duplicate event_id '" + ev.event_id + "' at data row " + std::to_string(row));

        auto time = parse_utc(field("time_utc"));
        if (!time) {
            reject("unparseable time_utc '" + std::string(field("time_utc")) + "'");
            continue;
        }
        ev.time_utc = *time;
        ev.country = std::string(field("country"));
        ev.state = std::string(field("state"));
        ev.location = std::string(field("location"));

        auto lat = parse_decimal(field("lat"));
        auto lon = parse_decimal(field("lon"));
        if (!lat || *lat < -90.0 || *lat > 90.0) {
            reject("invalid latitude '" + std::string(field("lat")) + "'");
            continue;
        }
        if (!lon || *lon < -180.0 || *lon > 180.0) {
            reject("invalid longitude '" + std::string(field("lon")) + "'");
            continue;
        }
        ev.latitude = *lat;
        ev.longitude = *lon;

        auto diameter_text = field("max_diameter_cm");
        if (!diameter_text.empty()) {
            auto d = parse_decimal(diameter_text);
            if (!d || *d <= 0.0 || !is_half_cm_multiple(*d)) {
                reject("malformed max_diameter_cm '" + std::string(diameter_text) + "'");
                continue;
            }
            ev.max_diameter_cm = std::round(*d * 2.0) / 2.0;
        }
        ev.image_refs = split_refs(field("image_refs"));
        table.events.push_back(std::move(ev));
    }
    return table;
}

EventTable load_events(const fs::path& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in)
        throw Error("cannot open event table " + csv_path.string());
    return parse_events(in);
}

SampleSet build_samples(std::span<const HailEvent> events, const fs::path& image_root) {
    SampleSet out;
    std::unordered_set<std::string> ids;
    for (const auto& ev : events) {
        if (!ev.max_diameter_cm || ev.image_refs.empty()) {
            ++out.dropped_events;
            continue;
        }
        for (std::size_t i = 0; i < ev.image_refs.size(); ++i) {
            const auto& ref = ev.image_refs[i];
            fs::path resolved;
            if (is_remote_ref(ref)) {
                resolved = image_root / fetched_image_name(ref);
            } else {
                fs::path p(ref);
                resolved = p.is_absolute() ? p : image_root / p;
            }
            resolved = resolved.lexically_normal();
            if (!readable_file(resolved)) {
                std::string reason = is_remote_ref(ref) ? "remote image not fetched" : "image file not readable";
                spdlog::warn("excluding image '{}' of event {}: {}", ref, ev.event_id, reason);
                out.excluded.push_back({ev.event_id, ref, reason});
                continue;
            }
            Sample s;
            s.sample_id = ev.event_id + "_" + std::to_string(i);
            s.event_id = ev.event_id;
            s.image_path = resolved;
            s.truth_diameter_cm = *ev.max_diameter_cm;
            if (!ids.insert(s.sample_id).second)
                throw Error("sample id collision: " + s.sample_id);
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty())
        throw Error("quantile of empty series");
    double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DatasetStats compute_stats(std::span<const Sample> samples, const DistanceLookup& distance_of) {
    if (samples.empty())
        throw Error("cannot compute statistics over an empty sample list");

    std::vector<double> values;
    values.reserve(samples.size());
    for (const auto& s : samples)
        values.push_back(s.truth_diameter_cm);
    std::sort(values.begin(), values.end());

    DatasetStats st;
    st.n = values.size();
    st.min_cm = values.front();
    st.max_cm = values.back();
    double n = static_cast<double>(st.n);
    st.mean_cm = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values)
        ss += (v - st.mean_cm) * (v - st.mean_cm);
    st.std_cm = std::sqrt(ss / n);
    st.q1_cm = quantile_type7(values, 0.25);
    st.q3_cm = quantile_type7(values, 0.75);

    std::size_t close = 0, annotated = 0;
    for (const auto& s : samples) {
        double edge = std::floor(s.truth_diameter_cm * 2.0) / 2.0;
        auto& bin = st.histogram[edge];
        auto d = distance_of ? distance_of(s.sample_id) : std::nullopt;
        if (!d) {
            ++bin.unannotated;
        } else if (*d == DistanceClass::close_up) {
            ++bin.close_up;
            ++close;
            ++annotated;
        } else {
            ++bin.distant;
            ++annotated;
        }
    }
    st.close_up_fraction = annotated ? static_cast<double>(close) / static_cast<double>(annotated) : 0.0;
    return st;
}

std::string samples_to_jsonl(std::span<const Sample> samples) {
    std::string out;
    for (const auto& s : samples) {
        nlohmann::ordered_json j;
        j["sample_id"] = s.sample_id;
        j["event_id"] = s.event_id;
        j["image_path"] = s.image_path.generic_string();
        j["truth_diameter_cm"] = s.truth_diameter_cm;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_samples_jsonl(const fs::path& path, std::span<const Sample> samples) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out << samples_to_jsonl(samples);
}

std::vector<Sample> parse_samples_jsonl(std::istream& in) {
    std::vector<Sample> samples;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        try {
            auto j = nlohmann::json::parse(line);
            Sample s;
            s.sample_id = j.at("sample_id").get<std::string>();
            s.event_id = j.at("event_id").get<std::string>();
            s.image_path = j.at("image_path").get<std::string>();
            s.truth_diameter_cm = j.at("truth_diameter_cm").get<double>();
            if (s.truth_diameter_cm <= 0.0 || !is_half_cm_multiple(s.truth_diameter_cm))
                throw Error("truth_diameter_cm must be a positive multiple of 0.5");
            if (!ids.insert(s.sample_id).second)
                throw Error("duplicate sample_id " + s.sample_id);
            samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error("dataset line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return samples;
}

std::vector<Sample> read_samples_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open dataset " + path.string());
    return parse_samples_jsonl(in);
}

} // namespace hailgauge
