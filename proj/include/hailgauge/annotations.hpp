#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hailgauge/types.hpp"

namespace hailgauge {

struct Annotation {
    std::string sample_id;
    ReferenceClass reference = ReferenceClass::unspecified_or_other;
    DistanceClass distance = DistanceClass::close_up;
    std::string annotator;
    UtcTime updated_at{};
    std::optional<std::string> raw_object; // free-text note, e.g. "tissue pack"

    bool operator==(const Annotation&) const = default;
};

// One JSON Lines record; key order sample_id,reference,distance,annotator,updated_at[,raw_object].
std::string annotation_to_json_line(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);

using AnnotationView = std::map<std::string, Annotation>;

struct AnnotationCounts {
    std::map<ReferenceClass, std::size_t> by_reference; // every class present, zero-filled
    std::map<DistanceClass, std::size_t> by_distance;
    std::size_t unannotated = 0;
};

/// Append-only annotation log with a last-write-wins current view.
///
/// Every upsert is appended to the log file (when one is attached) and flushed before returning.
/// All mutations go through one mutex; readers take immutable snapshots.
class AnnotationStore {
public:
    /// In-memory store over the given sample ids.
    explicit AnnotationStore(std::set<std::string> known_samples);

    /// Store backed by `log_path`; an existing log is replayed. Records for unknown samples are
    /// skipped with a warning.
    AnnotationStore(std::filesystem::path log_path, std::set<std::string> known_samples);

    /// Throws Error("unknown sample ...") when the sample is not in the dataset.
    Annotation upsert(Annotation a);

    std::optional<Annotation> current(const std::string& sample_id) const;
    std::shared_ptr<const AnnotationView> snapshot() const;
    std::size_t history_size() const;
    std::size_t dataset_size() const { return known_.size(); }
    AnnotationCounts counts() const;

    /// Writes the current view as JSON Lines, ordered by sample_id.
    void export_current(const std::filesystem::path& path) const;
    /// Upserts every record of an exported (or raw log) file.
    void import_from(const std::filesystem::path& path);

private:
    void apply(const Annotation& a);

    std::set<std::string> known_;
    std::optional<std::filesystem::path> log_path_;
    mutable std::mutex mutex_;
    std::shared_ptr<const AnnotationView> current_;
    std::size_t history_ = 0;
};

/// Replays an annotation log without dataset validation (reporting and metrics use this).
AnnotationView load_annotation_view(const std::filesystem::path& path);

AnnotationCounts count_annotations(const AnnotationView& view, const std::set<std::string>& dataset);

} // namespace hailgauge
