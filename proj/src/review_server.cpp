#include "hailgauge/review_server.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace hailgauge {

namespace fs = std::filesystem;
using json = nlohmann::json;

ReviewService::ReviewService(RunRecord run, std::vector<Sample> samples, std::shared_ptr<AnnotationStore> store,
                             ReviewOptions options)
    : run_(std::move(run)), samples_(std::move(samples)), store_(std::move(store)), options_(std::move(options)) {
    std::sort(samples_.begin(), samples_.end(),
              [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });
    for (std::size_t i = 0; i < samples_.size(); ++i)
        index_[samples_[i].sample_id] = i;

    // Residuals come straight from signed_errors so they match the metrics module bit for bit.
    auto truths = run_.truths();
    std::map<std::pair<std::string, Strategy>, std::vector<Measurement>> groups;
    std::map<std::tuple<std::string, Strategy, std::string>, const CellRecord*> cells;
    for (const auto& c : run_.cells) {
        groups[{c.model_id, c.strategy}].push_back(c.measurement);
        cells[{c.model_id, c.strategy, c.sample_id}] = &c;
    }
    for (const auto& [key, group] : groups) {
        auto errors = signed_errors(group, truths, run_.scoring, run_.value_source);
        std::map<std::string, const ScoredPair*> scored;
        for (const auto& p : errors.pairs)
            scored[p.sample_id] = &p;
        for (const auto& m : group) {
            Prediction pr{key.first, key.second, m, std::nullopt, std::nullopt, std::nullopt};
            if (auto it = scored.find(m.sample_id); it != scored.end()) {
                pr.pred = it->second->pred;
                pr.residual = it->second->error;
            }
            const auto* cell = cells.at({key.first, key.second, m.sample_id});
            if (cell->trace.has_step1())
                pr.step1_class = cell->trace.step1_class;
            predictions_[m.sample_id].push_back(std::move(pr));
        }
    }
    overall_ = evaluate_groups(run_.measurements(), truths, run_.scoring, run_.value_source);

    if (std::ifstream in(flags_path()); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line.starts_with("#"))
                continue;
            auto j = json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("sample_id"))
                flags_.insert(j["sample_id"].get<std::string>());
        }
    }
}

std::unique_ptr<ReviewService> ReviewService::open(const fs::path& run_dir, std::optional<fs::path> dataset,
                                                   std::optional<fs::path> annotations, ReviewOptions options) {
    auto run = load_run(run_dir);
    auto dataset_path = dataset.value_or(run.dataset_path);
    auto annotations_path = annotations.value_or(run.annotations_path);
    auto samples = read_samples_jsonl(dataset_path);
    std::set<std::string> known;
    for (const auto& s : samples)
        known.insert(s.sample_id);
    auto store = std::make_shared<AnnotationStore>(annotations_path, std::move(known));
    return std::make_unique<ReviewService>(std::move(run), std::move(samples), std::move(store), std::move(options));
}

bool ReviewService::is_outlier(const std::string& sample_id) const {
    auto it = predictions_.find(sample_id);
    if (it == predictions_.end())
        return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](const Prediction& p) {
        return p.residual && std::abs(*p.residual) > options_.outlier_threshold_cm;
    });
}

namespace {

json annotation_json(const Annotation& a) {
    return json::parse(annotation_to_json_line(a));
}

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json();
}

} // namespace

json ReviewService::item_json(const Sample& s, const AnnotationView& view) const {
    json item;
    item["sample_id"] = s.sample_id;
    item["event_id"] = s.event_id;
    item["truth_cm"] = s.truth_diameter_cm;
    item["image_url"] = "/api/images/" + s.sample_id;
    auto ann = view.find(s.sample_id);
    item["annotation"] = ann == view.end() ? json() : annotation_json(ann->second);
    json preds = json::array();
    if (auto it = predictions_.find(s.sample_id); it != predictions_.end()) {
        for (const auto& p : it->second) {
            json j;
            j["model"] = p.model_id;
            j["strategy"] = std::string(to_string(p.strategy));
            j["value_cm_raw"] = optional_number(p.measurement.value_cm_raw);
            j["value_cm_rounded"] = optional_number(p.measurement.value_cm_rounded);
            j["miss"] = p.measurement.miss;
            j["miss_reason"] = std::string(to_string(p.measurement.miss_reason));
            j["pred_cm"] = optional_number(p.pred);
            j["residual_cm"] = optional_number(p.residual);
            j["outlier"] = p.residual && std::abs(*p.residual) > options_.outlier_threshold_cm;
            j["step1_class"] = p.step1_class ? json(*p.step1_class) : json();
            preds.push_back(std::move(j));
        }
    }
    item["predictions"] = std::move(preds);
    item["outlier"] = is_outlier(s.sample_id);
    {
        std::lock_guard lock(flags_mutex_);
        item["flagged"] = flags_.contains(s.sample_id);
    }
    return item;
}

json ReviewService::list_samples(const SampleQuery& q) const {
    auto view = store_->snapshot();
    std::vector<const Sample*> matches;
    for (const auto& s : samples_) {
        auto ann = view->find(s.sample_id);
        if (q.reference && (ann == view->end() || ann->second.reference != *q.reference))
            continue;
        if (q.distance && (ann == view->end() || ann->second.distance != *q.distance))
            continue;
        if (q.outliers_only && !is_outlier(s.sample_id))
            continue;
        matches.push_back(&s);
    }
    json items = json::array();
    for (std::size_t i = q.offset; i < matches.size() && items.size() < q.limit; ++i)
        items.push_back(item_json(*matches[i], *view));
    return {{"total", matches.size()}, {"offset", q.offset}, {"limit", q.limit}, {"items", std::move(items)}};
}

json ReviewService::sample(const std::string& sample_id) const {
    auto it = index_.find(sample_id);
    if (it == index_.end())
        throw NotFound("unknown sample '" + sample_id + "'");
    return item_json(samples_[it->second], *store_->snapshot());
}

fs::path ReviewService::image_path(const std::string& sample_id) const {
    auto it = index_.find(sample_id);
    if (it == index_.end())
        throw NotFound("unknown sample '" + sample_id + "'");
    return samples_[it->second].image_path;
}

json ReviewService::put_annotation(const std::string& sample_id, const json& body) {
    if (!index_.contains(sample_id))
        throw NotFound("unknown sample '" + sample_id + "'");
    if (!body.is_object() || !body.contains("reference") || !body.contains("distance") ||
        !body["reference"].is_string() || !body["distance"].is_string())
        throw Error("body needs string fields 'reference' and 'distance'");
    Annotation a;
    a.sample_id = sample_id;
    auto ref = parse_reference_class(body["reference"].get<std::string>());
    if (!ref)
        throw Error("invalid reference token '" + body["reference"].get<std::string>() + "'");
    auto dist = parse_distance_class(body["distance"].get<std::string>());
    if (!dist)
        throw Error("invalid distance token '" + body["distance"].get<std::string>() + "'");
    a.reference = *ref;
    a.distance = *dist;
    a.annotator = body.value("annotator", options_.annotator);
    if (body.contains("raw_object") && body["raw_object"].is_string())
        a.raw_object = body["raw_object"].get<std::string>();
    a.updated_at = utc_now();
    return annotation_json(store_->upsert(std::move(a)));
}

json ReviewService::set_flag(const std::string& sample_id, const json& body) {
    if (!index_.contains(sample_id))
        throw NotFound("unknown sample '" + sample_id + "'");
    bool flagged = true;
    if (body.is_object() && body.contains("flagged")) {
        if (!body["flagged"].is_boolean())
            throw Error("'flagged' must be a boolean");
        flagged = body["flagged"].get<bool>();
    }
    std::lock_guard lock(flags_mutex_);
    if (flagged)
        flags_.insert(sample_id);
    else
        flags_.erase(sample_id);
    std::vector<std::string> ids(flags_.begin(), flags_.end());
    write_rerun_list(flags_path(), ids);
    return {{"sample_id", sample_id}, {"flagged", flagged}, {"flag_count", flags_.size()}};
}

std::vector<std::string> ReviewService::flagged() const {
    std::lock_guard lock(flags_mutex_);
    return {flags_.begin(), flags_.end()};
}

void ReviewService::export_rerun_list(const fs::path& path) const {
    auto ids = flagged();
    write_rerun_list(path, ids);
}

json ReviewService::metrics() const {
    json rows = json::array();
    for (const auto& s : overall_) {
        rows.push_back({{"model", s.model_id},
                        {"strategy", std::string(to_string(s.strategy))},
                        {"n", s.n},
                        {"mae_cm", s.mae_cm},
                        {"rmse_cm", s.rmse_cm},
                        {"bias_cm", s.bias_cm},
                        {"pearson_r", optional_number(s.pearson_r)},
                        {"miss", s.miss_count},
                        {"excluded", s.excluded_count}});
    }
    auto counts = store_->counts();
    json by_reference = json::object(), by_distance = json::object();
    std::size_t annotated = 0;
    for (const auto& [cls, n] : counts.by_reference) {
        by_reference[std::string(to_string(cls))] = n;
        annotated += n;
    }
    for (auto cls : kDistanceClasses)
        by_distance[std::string(to_string(cls))] = counts.by_distance.contains(cls) ? counts.by_distance.at(cls) : 0;
    return {{"run_id", run_.run_id},
            {"scoring", std::string(to_string(run_.scoring))},
            {"value_source", std::string(to_string(run_.value_source))},
            {"overall", std::move(rows)},
            {"annotations",
             {{"by_reference", std::move(by_reference)},
              {"by_distance", std::move(by_distance)},
              {"annotated", annotated},
              {"unannotated", counts.unannotated},
              {"dataset_size", samples_.size()}}},
            {"outlier_threshold_cm", options_.outlier_threshold_cm}};
}

json ReviewService::runs() const {
    json out = json::array();
    auto root = run_.run_dir.parent_path();
    std::vector<fs::path> dirs;
    if (fs::is_directory(root))
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_directory() && fs::is_regular_file(entry.path() / kRunLogName))
                dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        std::ifstream in(dir / kRunLogName);
        std::string first;
        std::getline(in, first);
        auto header = json::parse(first, nullptr, false);
        if (header.is_discarded() || header.value("type", "") != "header")
            continue;
        out.push_back({{"run_id", header.value("run_id", dir.filename().string())},
                       {"config_hash", header.value("config_hash", "")},
                       {"grid_size", header.value("grid_size", 0)},
                       {"current", fs::equivalent(dir, run_.run_dir)}});
    }
    return out;
}

std::string fallback_index_html() {
    return R"(<!doctype html>
<html lang="en">
<head><meta charset="utf-8"><title>hailgauge review</title></head>
<body>
<h1>hailgauge review server</h1>
<p>No UI bundle is installed. Start the server with <code>--static &lt;dir&gt;</code> to serve one.</p>
<ul>
<li><a href="/api/samples?limit=20">/api/samples</a></li>
<li><a href="/api/metrics">/api/metrics</a></li>
<li><a href="/api/runs">/api/runs</a></li>
</ul>
</body>
</html>
)";
}

// ---------------------------------------------------------------------------

struct ReviewServer::Impl {
    std::shared_ptr<ReviewService> service;
    httplib::Server server;
    std::thread thread;
};

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, {{"error", message}}, status);
}

std::optional<std::size_t> size_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name))
        return std::nullopt;
    auto v = req.get_param_value(name);
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw Error(std::string("bad query parameter '") + name + "'");
    return out;
}

std::string media_type_for(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png")
        return "image/png";
    if (ext == ".webp")
        return "image/webp";
    if (ext == ".gif")
        return "image/gif";
    return "image/jpeg";
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFound& e) {
        send_error(res, 404, e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, e.what());
    } catch (const Error& e) {
        send_error(res, 400, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

} // namespace

ReviewServer::ReviewServer(std::shared_ptr<ReviewService> service) : impl_(std::make_unique<Impl>()) {
    impl_->service = std::move(service);
    auto& srv = impl_->server;
    auto svc = impl_->service;
    // httplib's default adds SO_REUSEPORT, which would let a second server share a busy port.
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    srv.Get("/api/samples", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            SampleQuery q;
            q.limit = size_param(req, "limit").value_or(q.limit);
            q.offset = size_param(req, "offset").value_or(0);
            if (req.has_param("reference")) {
                auto v = req.get_param_value("reference");
                q.reference = parse_reference_class(v);
                if (!q.reference)
                    throw Error("invalid reference token '" + v + "'");
            }
            if (req.has_param("distance")) {
                auto v = req.get_param_value("distance");
                q.distance = parse_distance_class(v);
                if (!q.distance)
                    throw Error("invalid distance token '" + v + "'");
            }
            if (req.has_param("outliers_only")) {
                auto v = req.get_param_value("outliers_only");
                q.outliers_only = v == "true" || v == "1";
            }
            send_json(res, svc->list_samples(q));
        });
    });
    srv.Get(R"(/api/samples/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc->sample(req.matches[1])); });
    });
    srv.Get(R"(/api/images/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto path = svc->image_path(req.matches[1]);
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw NotFound("image unavailable");
            std::ostringstream buf;
            buf << in.rdbuf();
            res.set_content(buf.str(), media_type_for(path));
        });
    });
    srv.Put(R"(/api/annotations/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc->put_annotation(req.matches[1], json::parse(req.body))); });
    });
    srv.Post(R"(/api/flags/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json body = req.body.empty() ? json::object() : json::parse(req.body);
            send_json(res, svc->set_flag(req.matches[1], body));
        });
    });
    srv.Get("/api/metrics", [svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc->metrics()); });
    });
    srv.Get("/api/runs", [svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc->runs()); });
    });

    const auto& root = svc->options().static_root;
    if (root && fs::is_directory(*root)) {
        srv.set_mount_point("/", root->string());
    } else {
        srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(fallback_index_html(), "text/html; charset=utf-8");
        });
    }
}

ReviewServer::~ReviewServer() {
    stop();
}

int ReviewServer::start(const std::string& host, int port) {
    auto& srv = impl_->server;
    int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
    if (bound < 0)
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    port_ = bound;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void ReviewServer::serve_forever(const std::string& host, int port) {
    start(host, port);
    if (impl_->thread.joinable())
        impl_->thread.join();
}

void ReviewServer::stop() {
    if (!impl_)
        return;
    impl_->server.stop();
    if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id())
        impl_->thread.join();
}

} // namespace hailgauge
