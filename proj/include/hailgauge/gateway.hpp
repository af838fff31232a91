#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hailgauge/types.hpp"

namespace hailgauge {

enum class Adapter { openai, anthropic, google, mock };

std::string_view to_string(Adapter a);
std::optional<Adapter> parse_adapter(std::string_view token);

/// Identity and transport settings of one multimodal model.
struct ModelEndpoint {
    std::string model_id;       // logical name used in reports and cache paths (G4, CS4, ...)
    std::string provider_model; // name sent on the wire; defaults to model_id
    std::string base_url;
    std::string auth_env_var;
    Adapter adapter = Adapter::openai;
    int max_output_tokens = 100;
    double temperature = 0.0;
    std::chrono::seconds request_timeout{60};
    int max_retries = 3; // retries after the first attempt
    std::chrono::milliseconds retry_base_delay{500};
    double rate_limit_per_sec = 1.0; // <= 0 disables the limiter
    std::optional<std::filesystem::path> mock_script;

    const std::string& wire_model() const { return provider_model.empty() ? model_id : provider_model; }
};

struct ImagePayload {
    std::vector<std::uint8_t> bytes;
    std::string media_type = "image/jpeg";
};

struct VisionRequest {
    std::string prompt_text;
    std::shared_ptr<const ImagePayload> image;
    std::string idempotency_key;
    // "<sample_id>/<stage>" tag for scripted mocks; not part of the idempotency key.
    std::string label;
};

struct VisionOutcome {
    OutcomeStatus status = OutcomeStatus::transport_error;
    std::optional<std::string> raw_text; // present iff status == ok
    std::int64_t latency_ms = 0;
    int attempt_count = 0;
    bool cached = false;
    std::string detail; // diagnostic text for failures
};

nlohmann::json outcome_to_json(const VisionOutcome& o);
VisionOutcome outcome_from_json(const nlohmann::json& j);

/// SHA-256 over (model_id, temperature, max_output_tokens, prompt, normalized image bytes).
std::string idempotency_key(const ModelEndpoint& ep, std::string_view prompt, std::span<const std::uint8_t> image);

VisionRequest make_request(const ModelEndpoint& ep, std::string prompt, std::shared_ptr<const ImagePayload> image,
                           std::string label = {});

inline constexpr int kMaxImageSide = 2048;

/// Re-encodes as baseline JPEG with the longest side capped at kMaxImageSide and metadata dropped.
/// Output carries a marker comment so a second pass returns the bytes unchanged.
/// Throws Error("corrupt image") for undecodable or truncated input.
std::vector<std::uint8_t> normalize_image(std::span<const std::uint8_t> bytes);

struct ImageSize {
    int width = 0;
    int height = 0;
};
ImageSize decode_image_size(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------

struct BackendReply {
    OutcomeStatus status = OutcomeStatus::transport_error;
    std::string text;
    std::string detail;
};

/// One transport attempt against a provider. Implementations must be thread-safe.
class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendReply call(const ModelEndpoint& ep, const VisionRequest& req) = 0;
};

/// Request body for the adapter's wire format. The OpenAI chat-completions shape is canonical.
nlohmann::json build_wire_payload(const ModelEndpoint& ep, const VisionRequest& req);
/// Extracts the reply text from a provider response body.
std::optional<std::string> extract_reply_text(Adapter adapter, const nlohmann::json& body);

/// Live HTTP(S) backend. Reads the API key from ep.auth_env_var at call time.
class HttpBackend final : public Backend {
public:
    BackendReply call(const ModelEndpoint& ep, const VisionRequest& req) override;
};

/// Deterministic scripted backend.
///
/// Script JSON:
///   { "default":  <entry>,                       // fallback for unmatched requests
///     "by_key":   { "<idempotency_key>": <entry> },
///     "by_label": { "<sample_id>/<stage>": <entry> },   // stage: p1 | step1 | step2
///     "sequence": [ <entry>, ... ] }             // consumed in call order
/// entry: "3.5" | { "status": "ok"|"provider_rejection"|"transport_error"|"timeout",
///                  "text": "...", "transport_faults": N }
/// An entry with transport_faults N fails N attempts with transport_error before answering.
class MockBackend final : public Backend {
public:
    struct Entry {
        OutcomeStatus status = OutcomeStatus::ok;
        std::string text;
        int transport_faults = 0;
    };

    MockBackend() = default;
    explicit MockBackend(const nlohmann::json& script);
    static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

    void set_default(Entry e);
    void script_key(std::string key, Entry e);
    void script_label(std::string label, Entry e);
    void push_sequence(Entry e);

    BackendReply call(const ModelEndpoint& ep, const VisionRequest& req) override;

    // Number of attempts that reached this backend (cache hits never do).
    std::size_t call_count() const { return calls_.load(); }
    std::vector<std::string> call_labels() const;

private:
    BackendReply answer(Entry& e, std::size_t& fault_counter);

    mutable std::mutex mutex_;
    Entry default_{OutcomeStatus::ok, "4.0", 0};
    std::map<std::string, Entry> by_key_;
    std::map<std::string, Entry> by_label_;
    std::deque<Entry> sequence_;
    std::map<std::string, std::size_t> faults_seen_;
    std::size_t sequence_faults_ = 0;
    std::vector<std::string> labels_;
    std::atomic<std::size_t> calls_{0};
};

/// On-disk outcome cache: <root>/<model_id>/<key>.json. Concurrent readers, serialized writers.
class OutcomeCache {
public:
    explicit OutcomeCache(std::filesystem::path root);

    std::optional<VisionOutcome> get(const std::string& model_id, const std::string& key) const;
    void put(const std::string& model_id, const std::string& key, const VisionOutcome& outcome);
    std::filesystem::path path_for(const std::string& model_id, const std::string& key) const;

private:
    std::filesystem::path root_;
    mutable std::shared_mutex mutex_;
};

/// Token bucket; capacity one token, refilled at `rate_per_sec`.
class RateLimiter {
public:
    explicit RateLimiter(double rate_per_sec);
    void acquire();

private:
    double rate_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_;
};

/// Uniform client for one endpoint: cache lookup, rate limiting, retries with exponential backoff.
/// send() never throws; every failure mode is reported through VisionOutcome::status.
class Gateway {
public:
    Gateway(ModelEndpoint endpoint, std::shared_ptr<Backend> backend, std::shared_ptr<OutcomeCache> cache = nullptr);

    VisionOutcome send(const VisionRequest& request);
    const ModelEndpoint& endpoint() const { return endpoint_; }

private:
    ModelEndpoint endpoint_;
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<OutcomeCache> cache_;
    std::unique_ptr<RateLimiter> limiter_;
};

/// Backend for the endpoint's adapter: HttpBackend for live adapters, MockBackend (from
/// mock_script when set) for mock.
std::shared_ptr<Backend> make_backend(const ModelEndpoint& ep);

} // namespace hailgauge
