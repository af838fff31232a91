#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hailgauge/types.hpp"

namespace hailgauge {

/// One row of the ESWD-style event table.
struct HailEvent {
    std::string event_id;
    UtcTime time_utc{};
    std::string country;
    std::string state;
    std::string location;
    double latitude = 0.0;
    double longitude = 0.0;
    std::optional<double> max_diameter_cm;
    std::vector<std::string> image_refs;
};

struct RejectedRow {
    std::size_t row = 0; // 1-based data row (header excluded)
    std::string reason;
};

struct EventTable {
    std::vector<HailEvent> events;
    std::vector<RejectedRow> rejects;
};

inline constexpr std::array<std::string_view, 9> kEventColumns = {
    "event_id", "time_utc", "country", "state", "location", "lat", "lon", "max_diameter_cm", "image_refs",
};

/// Loads the event CSV. Rows with bad coordinates, timestamps or diameters land in `rejects`.
/// Throws Error on a missing file, missing mandatory columns or a duplicate event_id.
EventTable load_events(const std::filesystem::path& csv_path);
EventTable parse_events(std::istream& in);

/// A single image paired with its event's ground-truth maximum diameter.
struct Sample {
    std::string sample_id;
    std::string event_id;
    std::filesystem::path image_path;
    double truth_diameter_cm = 0.0;

    bool operator==(const Sample&) const = default;
};

struct ExcludedImage {
    std::string event_id;
    std::string image_ref;
    std::string reason;
};

struct SampleSet {
    std::vector<Sample> samples;
    std::vector<ExcludedImage> excluded;
    std::size_t dropped_events = 0; // no diameter or no image refs at all
};

bool is_half_cm_multiple(double v);
bool is_remote_ref(std::string_view ref);

// Local file name a remote image is stored under by fetch_images.
std::string fetched_image_name(std::string_view url);

/// Fans events out into one sample per (event, image). Local refs resolve against `image_root`
/// unless absolute; remote refs resolve to their fetched file. Unresolvable images are excluded.
SampleSet build_samples(std::span<const HailEvent> events, const std::filesystem::path& image_root);

struct FetchReport {
    std::size_t downloaded = 0;
    std::size_t already_present = 0;
    std::vector<std::string> failures;
};

/// Downloads every remote image ref into `image_dir`. The only step that touches the network.
FetchReport fetch_images(std::span<const HailEvent> events, const std::filesystem::path& image_dir);

struct HistogramBin {
    std::size_t close_up = 0;
    std::size_t distant = 0;
    std::size_t unannotated = 0;

    std::size_t total() const { return close_up + distant + unannotated; }
};

struct DatasetStats {
    std::size_t n = 0;
    double min_cm = 0.0;
    double max_cm = 0.0;
    double mean_cm = 0.0;
    double std_cm = 0.0; // population
    double q1_cm = 0.0;
    double q3_cm = 0.0;
    std::map<double, HistogramBin> histogram; // keyed by bin lower edge, bins are [k, k + 0.5)
    double close_up_fraction = 0.0;           // over samples carrying a distance annotation
};

using DistanceLookup = std::function<std::optional<DistanceClass>(const std::string& sample_id)>;

DatasetStats compute_stats(std::span<const Sample> samples, const DistanceLookup& distance_of);

// Linear interpolation between closest ranks (R type 7). `sorted` must be ascending and non-empty.
double quantile_type7(std::span<const double> sorted, double p);

std::string samples_to_jsonl(std::span<const Sample> samples);
void write_samples_jsonl(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path);
std::vector<Sample> parse_samples_jsonl(std::istream& in);

} // namespace hailgauge
