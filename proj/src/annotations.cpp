#include "hailgauge/annotations.hpp"

#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace hailgauge {

namespace fs = std::filesystem;

std::string annotation_to_json_line(const Annotation& a) {
    nlohmann::ordered_json j;
    j["sample_id"] = a.sample_id;
    j["reference"] = std::string(to_string(a.reference));
    j["distance"] = std::string(to_string(a.distance));
    j["annotator"] = a.annotator;
    j["updated_at"] = format_utc(a.updated_at);
    if (a.raw_object)
        j["raw_object"] = *a.raw_object;
    return j.dump();
}

Annotation annotation_from_json(const nlohmann::json& j) {
    Annotation a;
    a.sample_id = j.at("sample_id").get<std::string>();
    auto ref = j.at("reference").get<std::string>();
    auto dist = j.at("distance").get<std::string>();
    auto r = parse_reference_class(ref);
    if (!r)
        throw Error("invalid reference token '" + ref + "'");
    auto d = parse_distance_class(dist);
    if (!d)
        throw Error("invalid distance token '" + dist + "'");
    a.reference = *r;
    a.distance = *d;
    a.annotator = j.value("annotator", std::string{});
    if (j.contains("updated_at")) {
        auto ts = j.at("updated_at").get<std::string>();
        auto t = parse_utc(ts);
        if (!t)
            throw Error("invalid updated_at '" + ts + "'");
        a.updated_at = *t;
    } else {
        a.updated_at = utc_now();
    }
    if (j.contains("raw_object") && !j.at("raw_object").is_null())
        a.raw_object = j.at("raw_object").get<std::string>();
    return a;
}

namespace {

template <typename Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open annotations " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line.starts_with("#"))
            continue;
        try {
            fn(annotation_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

bool supersedes(const Annotation& incoming, const AnnotationView& view) {
    auto it = view.find(incoming.sample_id);
    return it == view.end() || incoming.updated_at >= it->second.updated_at;
}

} // namespace

AnnotationStore::AnnotationStore(std::set<std::string> known_samples)
    : known_(std::move(known_samples)), current_(std::make_shared<AnnotationView>()) {}

AnnotationStore::AnnotationStore(fs::path log_path, std::set<std::string> known_samples)
    : known_(std::move(known_samples)), log_path_(std::move(log_path)), current_(std::make_shared<AnnotationView>()) {
    if (fs::exists(*log_path_)) {
        for_each_record(*log_path_, [&](const Annotation& a) {
            if (!known_.contains(a.sample_id)) {
                spdlog::warn("annotation log references unknown sample {}; skipped", a.sample_id);
                return;
            }
            apply(a);
        });
    }
}

void AnnotationStore::apply(const Annotation& a) {
    ++history_;
    if (!supersedes(a, *current_))
        return;
    auto next = std::make_shared<AnnotationView>(*current_);
    (*next)[a.sample_id] = a;
    current_ = std::move(next);
}

Annotation AnnotationStore::upsert(Annotation a) {
    if (!known_.contains(a.sample_id))
        throw Error("unknown sample '" + a.sample_id + "'");
    std::lock_guard lock(mutex_);
    if (log_path_) {
        if (log_path_->has_parent_path())
            fs::create_directories(log_path_->parent_path());
        std::ofstream out(*log_path_, std::ios::binary | std::ios::app);
        if (!out)
            throw Error("cannot append to " + log_path_->string());
        out << annotation_to_json_line(a) << '\n';
        out.flush();
    }
    apply(a);
    return current_->at(a.sample_id);
}

std::optional<Annotation> AnnotationStore::current(const std::string& sample_id) const {
    auto view = snapshot();
    auto it = view->find(sample_id);
    if (it == view->end())
        return std::nullopt;
    return it->second;
}

std::shared_ptr<const AnnotationView> AnnotationStore::snapshot() const {
    std::lock_guard lock(mutex_);
    return current_;
}

std::size_t AnnotationStore::history_size() const {
    std::lock_guard lock(mutex_);
    return history_;
}

AnnotationCounts AnnotationStore::counts() const {
    return count_annotations(*snapshot(), known_);
}

void AnnotationStore::export_current(const fs::path& path) const {
    auto view = snapshot();
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    for (const auto& [id, a] : *view)
        out << annotation_to_json_line(a) << '\n';
}

void AnnotationStore::import_from(const fs::path& path) {
    std::vector<Annotation> records;
    for_each_record(path, [&](const Annotation& a) { records.push_back(a); });
    for (auto& a : records)
        upsert(std::move(a));
}

AnnotationView load_annotation_view(const fs::path& path) {
    AnnotationView view;
    if (!fs::exists(path))
        return view;
    for_each_record(path, [&](const Annotation& a) {
        if (supersedes(a, view))
            view[a.sample_id] = a;
    });
    return view;
}

AnnotationCounts count_annotations(const AnnotationView& view, const std::set<std::string>& dataset) {
    AnnotationCounts c;
    for (auto r : kReferenceClasses)
        c.by_reference[r] = 0;
    for (auto d : kDistanceClasses)
        c.by_distance[d] = 0;
    for (const auto& id : dataset) {
        auto it = view.find(id);
        if (it == view.end()) {
            ++c.unannotated;
            continue;
        }
        ++c.by_reference[it->second.reference];
        ++c.by_distance[it->second.distance];
    }
    return c;
}

} // namespace hailgauge
