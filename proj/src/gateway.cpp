#include "hailgauge/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hailgauge/digest.hpp"

namespace hailgauge {

namespace fs = std::filesystem;

std::string_view to_string(Adapter a) {
    switch (a) {
    case Adapter::openai: return "openai";
    case Adapter::anthropic: return "anthropic";
    case Adapter::google: return "google";
    case Adapter::mock: return "mock";
    }
    return "openai";
}

std::optional<Adapter> parse_adapter(std::string_view token) {
    for (auto a : {Adapter::openai, Adapter::anthropic, Adapter::google, Adapter::mock})
        if (to_string(a) == token)
            return a;
    return std::nullopt;
}

nlohmann::json outcome_to_json(const VisionOutcome& o) {
    nlohmann::ordered_json j;
    j["status"] = std::string(to_string(o.status));
    if (o.raw_text)
        j["raw_text"] = *o.raw_text;
    j["latency_ms"] = o.latency_ms;
    j["attempt_count"] = o.attempt_count;
    if (!o.detail.empty())
        j["detail"] = o.detail;
    return j;
}

VisionOutcome outcome_from_json(const nlohmann::json& j) {
    VisionOutcome o;
    auto status = j.at("status").get<std::string>();
    auto parsed = parse_outcome_status(status);
    if (!parsed)
        throw Error("invalid outcome status '" + status + "'");
    o.status = *parsed;
    if (j.contains("raw_text"))
        o.raw_text = j.at("raw_text").get<std::string>();
    o.latency_ms = j.value("latency_ms", std::int64_t{0});
    o.attempt_count = j.value("attempt_count", 0);
    o.detail = j.value("detail", std::string{});
    return o;
}

std::string idempotency_key(const ModelEndpoint& ep, std::string_view prompt, std::span<const std::uint8_t> image) {
    FieldHasher h;
    h.field(ep.model_id)
        .field(format_double(ep.temperature))
        .field(std::to_string(ep.max_output_tokens))
        .field(prompt)
        .field(image);
    return h.hex();
}

VisionRequest make_request(const ModelEndpoint& ep, std::string prompt, std::shared_ptr<const ImagePayload> image,
                           std::string label) {
    VisionRequest req;
    req.idempotency_key = idempotency_key(ep, prompt, image ? std::span<const std::uint8_t>(image->bytes)
                                                            : std::span<const std::uint8_t>{});
    req.prompt_text = std::move(prompt);
    req.image = std::move(image);
    req.label = std::move(label);
    return req;
}

// ---------------------------------------------------------------------------
// Wire formats

nlohmann::json build_wire_payload(const ModelEndpoint& ep, const VisionRequest& req) {
    using json = nlohmann::ordered_json;
    const std::string b64 = req.image ? base64_encode(req.image->bytes) : std::string{};
    const std::string media = req.image ? req.image->media_type : std::string("image/jpeg");
    switch (ep.adapter) {
    case Adapter::anthropic:
        return json{
            {"model", ep.wire_model()},
            {"max_tokens", ep.max_output_tokens},
            {"temperature", ep.temperature},
            {"messages",
             json::array({json{{"role", "user"},
                               {"content", json::array({json{{"type", "image"},
                                                             {"source", json{{"type", "base64"},
                                                                             {"media_type", media},
                                                                             {"data", b64}}}},
                                                        json{{"type", "text"}, {"text", req.prompt_text}}})}}})}};
    case Adapter::google:
        return json{
            {"contents",
             json::array({json{{"role", "user"},
                               {"parts", json::array({json{{"text", req.prompt_text}},
                                                      json{{"inline_data",
                                                            json{{"mime_type", media}, {"data", b64}}}}})}}})},
            {"generationConfig", json{{"maxOutputTokens", ep.max_output_tokens}, {"temperature", ep.temperature}}}};
    case Adapter::openai:
    case Adapter::mock:
    default:
        return json{
            {"model", ep.wire_model()},
            {"max_tokens", ep.max_output_tokens},
            {"temperature", ep.temperature},
            {"messages",
             json::array({json{
                 {"role", "user"},
                 {"content", json::array({json{{"type", "text"}, {"text", req.prompt_text}},
                                          json{{"type", "image_url"},
                                               {"image_url", json{{"url", "data:" + media + ";base64," + b64}}}}})}}})}};
    }
}

std::optional<std::string> extract_reply_text(Adapter adapter, const nlohmann::json& body) {
    try {
        switch (adapter) {
        case Adapter::anthropic: {
            std::string text;
            for (const auto& part : body.at("content"))
                if (part.value("type", std::string{}) == "text")
                    text += part.at("text").get<std::string>();
            return text;
        }
        case Adapter::google: {
            std::string text;
            for (const auto& part : body.at("candidates").at(0).at("content").at("parts"))
                if (part.contains("text"))
                    text += part.at("text").get<std::string>();
            return text;
        }
        case Adapter::openai:
        case Adapter::mock:
        default: {
            const auto& content = body.at("choices").at(0).at("message").at("content");
            if (content.is_null())
                return std::string{};
            return content.get<std::string>();
        }
        }
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

namespace {

struct SplitUrl {
    std::string origin;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/')
        path.pop_back();
    return {url.substr(0, path_start), path};
}

bool retryable_http(int status) {
    return status == 408 || status == 429 || status >= 500;
}

} // namespace

BackendReply HttpBackend::call(const ModelEndpoint& ep, const VisionRequest& req) {
    const char* key = ep.auth_env_var.empty() ? nullptr : std::getenv(ep.auth_env_var.c_str());
    auto [origin, base_path] = split_url(ep.base_url);

    httplib::Headers headers;
    std::string path = base_path;
    switch (ep.adapter) {
    case Adapter::anthropic:
        path += "/v1/messages";
        if (key)
            headers.emplace("x-api-key", key);
        headers.emplace("anthropic-version", "2023-06-01");
        break;
    case Adapter::google:
        path += "/v1beta/models/" + ep.wire_model() + ":generateContent";
        if (key)
            headers.emplace("x-goog-api-key", key);
        break;
    default:
        path += "/chat/completions";
        if (key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
        break;
    }

    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::seconds(std::min<std::int64_t>(ep.request_timeout.count(), 30)));
    client.set_read_timeout(ep.request_timeout);
    client.set_write_timeout(ep.request_timeout);

    const auto body = build_wire_payload(ep, req).dump();
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
        auto err = res.error();
        auto elapsed = std::chrono::steady_clock::now() - start;
        bool timed_out = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && elapsed >= ep.request_timeout * 95 / 100);
        return {timed_out ? OutcomeStatus::timeout : OutcomeStatus::transport_error, {}, httplib::to_string(err)};
    }
    if (res->status != 200) {
        auto snippet = res->body.substr(0, 300);
        auto status = retryable_http(res->status) ? OutcomeStatus::transport_error : OutcomeStatus::provider_rejection;
        return {status, {}, "HTTP " + std::to_string(res->status) + ": " + snippet};
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
        return {OutcomeStatus::provider_rejection, {}, "response body is not JSON"};
    auto text = extract_reply_text(ep.adapter, parsed);
    if (!text)
        return {OutcomeStatus::provider_rejection, {}, "response lacks reply text"};
    return {OutcomeStatus::ok, *text, {}};
}

// ---------------------------------------------------------------------------
// Mock

namespace {

MockBackend::Entry parse_entry(const nlohmann::json& j) {
    MockBackend::Entry e;
    if (j.is_string()) {
        e.text = j.get<std::string>();
        return e;
    }
    auto status = j.value("status", std::string("ok"));
    auto parsed = parse_outcome_status(status);
    if (!parsed)
        throw Error("mock script: invalid status '" + status + "'");
    e.status = *parsed;
    e.text = j.value("text", std::string{});
    e.transport_faults = j.value("transport_faults", 0);
    return e;
}

} // namespace

MockBackend::MockBackend(const nlohmann::json& script) {
    if (script.contains("default"))
        default_ = parse_entry(script.at("default"));
    if (script.contains("by_key"))
        for (const auto& [k, v] : script.at("by_key").items())
            by_key_[k] = parse_entry(v);
    if (script.contains("by_label"))
        for (const auto& [k, v] : script.at("by_label").items())
            by_label_[k] = parse_entry(v);
    if (script.contains("sequence"))
        for (const auto& v : script.at("sequence"))
            sequence_.push_back(parse_entry(v));
}

std::shared_ptr<MockBackend> MockBackend::from_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open mock script " + path.string());
    try {
        return std::make_shared<MockBackend>(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error("mock script " + path.string() + ": " + e.what());
    }
}

void MockBackend::set_default(Entry e) {
    std::lock_guard lock(mutex_);
    default_ = std::move(e);
}

void MockBackend::script_key(std::string key, Entry e) {
    std::lock_guard lock(mutex_);
    by_key_[std::move(key)] = std::move(e);
}

void MockBackend::script_label(std::string label, Entry e) {
    std::lock_guard lock(mutex_);
    by_label_[std::move(label)] = std::move(e);
}

void MockBackend::push_sequence(Entry e) {
    std::lock_guard lock(mutex_);
    sequence_.push_back(std::move(e));
}

std::vector<std::string> MockBackend::call_labels() const {
    std::lock_guard lock(mutex_);
    return labels_;
}

BackendReply MockBackend::answer(Entry& e, std::size_t& fault_counter) {
    if (fault_counter < static_cast<std::size_t>(e.transport_faults)) {
        ++fault_counter;
        return {OutcomeStatus::transport_error, {}, "scripted transport fault"};
    }
    if (e.status == OutcomeStatus::ok)
        return {OutcomeStatus::ok, e.text, {}};
    return {e.status, {}, "scripted " + std::string(to_string(e.status))};
}

BackendReply MockBackend::call(const ModelEndpoint&, const VisionRequest& req) {
    ++calls_;
    std::lock_guard lock(mutex_);
    labels_.push_back(req.label);
    if (auto it = by_key_.find(req.idempotency_key); it != by_key_.end())
        return answer(it->second, faults_seen_["key:" + it->first]);
    if (auto it = by_label_.find(req.label); it != by_label_.end())
        return answer(it->second, faults_seen_["label:" + it->first]);
    if (!sequence_.empty()) {
        auto& front = sequence_.front();
        if (sequence_faults_ < static_cast<std::size_t>(front.transport_faults))
            return answer(front, sequence_faults_);
        auto reply = answer(front, sequence_faults_);
        sequence_.pop_front();
        sequence_faults_ = 0;
        return reply;
    }
    // Fault injection is per scripted entry; the default answers directly.
    std::size_t satisfied = static_cast<std::size_t>(default_.transport_faults);
    return answer(default_, satisfied);
}

// ---------------------------------------------------------------------------
// Cache

OutcomeCache::OutcomeCache(fs::path root) : root_(std::move(root)) {}

fs::path OutcomeCache::path_for(const std::string& model_id, const std::string& key) const {
    return root_ / model_id / (key + ".json");
}

std::optional<VisionOutcome> OutcomeCache::get(const std::string& model_id, const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto p = path_for(model_id, key);
    std::ifstream in(p, std::ios::binary);
    if (!in)
        return std::nullopt;
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        return std::nullopt;
    try {
        auto o = outcome_from_json(j);
        if (o.status != OutcomeStatus::ok || !o.raw_text)
            return std::nullopt;
        return o;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void OutcomeCache::put(const std::string& model_id, const std::string& key, const VisionOutcome& outcome) {
    std::unique_lock lock(mutex_);
    auto p = path_for(model_id, key);
    fs::create_directories(p.parent_path());
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << outcome_to_json(outcome).dump(2) << '\n';
    }
    fs::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(double rate_per_sec) : rate_(rate_per_sec), next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0.0)
        return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(1.0 / rate_));
    }
    std::this_thread::sleep_until(slot);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(ModelEndpoint endpoint, std::shared_ptr<Backend> backend, std::shared_ptr<OutcomeCache> cache)
    : endpoint_(std::move(endpoint)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      limiter_(std::make_unique<RateLimiter>(endpoint_.rate_limit_per_sec)) {}

VisionOutcome Gateway::send(const VisionRequest& request) {
    if (cache_) {
        if (auto hit = cache_->get(endpoint_.model_id, request.idempotency_key)) {
            hit->cached = true;
            return *hit;
        }
    }

    VisionOutcome outcome;
    const auto start = std::chrono::steady_clock::now();
    const int max_attempts = 1 + std::max(0, endpoint_.max_retries);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        outcome.attempt_count = attempt;
        BackendReply reply;
        try {
            limiter_->acquire();
            reply = backend_->call(endpoint_, request);
        } catch (const std::exception& e) {
            reply = {OutcomeStatus::transport_error, {}, e.what()};
        }
        outcome.status = reply.status;
        outcome.detail = reply.detail;
        if (reply.status == OutcomeStatus::ok) {
            outcome.raw_text = std::move(reply.text);
            break;
        }
        if (reply.status == OutcomeStatus::provider_rejection)
            break;
        if (attempt < max_attempts) {
            auto delay = endpoint_.retry_base_delay * (1LL << std::min(attempt - 1, 10));
            delay = std::min<std::chrono::milliseconds>(delay, std::chrono::seconds(30));
            spdlog::debug("{}: attempt {} failed ({}); retrying in {} ms", endpoint_.model_id, attempt,
                          reply.detail, delay.count());
            std::this_thread::sleep_for(delay);
        }
    }
    outcome.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();

    if (outcome.status == OutcomeStatus::ok && cache_) {
        try {
            cache_->put(endpoint_.model_id, request.idempotency_key, outcome);
        } catch (const std::exception& e) {
            spdlog::warn("cache write failed for {}: {}", endpoint_.model_id, e.what());
        }
    }
    return outcome;
}

std::shared_ptr<Backend> make_backend(const ModelEndpoint& ep) {
    if (ep.adapter == Adapter::mock) {
        if (ep.mock_script)
            return MockBackend::from_file(*ep.mock_script);
        return std::make_shared<MockBackend>();
    }
    return std::make_shared<HttpBackend>();
}

} // namespace hailgauge
