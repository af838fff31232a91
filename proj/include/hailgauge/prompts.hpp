#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hailgauge/gateway.hpp"
#include "hailgauge/types.hpp"

namespace hailgauge {

/// Which step-2 wording a reference object routes to.
enum class Step2Family {
    known_dimensions, // hand, coin, lighter, bottle cap: object name + typical dimensions substituted
    ruler,            // read the ruler markings directly
    contextual,       // no usable scale object
};

struct ReferenceSpec {
    std::string class_token; // lowercase single word, e.g. "hand"
    std::string display_name;
    std::string typical_dimensions_text;
    double canonical_size_cm = 0.0; // informational only
    Step2Family family = Step2Family::contextual;
    ReferenceClass stratum = ReferenceClass::unspecified_or_other;

    bool operator==(const ReferenceSpec&) const = default;
};

struct Step1Classification {
    ReferenceSpec spec;
    std::string token;       // normalized first word of the reply
    bool recognized = false; // token (or a synonym) names a catalogued object
};

/// Reference objects the step-1 answer can resolve to, plus the synonym table.
class ReferenceCatalog {
public:
    static ReferenceCatalog defaults();

    const ReferenceSpec& unspecified() const;
    const ReferenceSpec* find(std::string_view class_token) const;
    const std::vector<ReferenceSpec>& specs() const { return specs_; }
    const std::map<std::string, std::string>& synonyms() const { return synonyms_; }

    /// Replaces the typical-dimensions text for a catalogued object.
    void set_dimensions(std::string_view class_token, std::string text);

    /// Lowercases, drops punctuation, keeps the first word, applies synonyms. Total: unknown or
    /// empty answers resolve to the unspecified spec with the token preserved.
    Step1Classification classify(std::string_view raw) const;

private:
    std::vector<ReferenceSpec> specs_;
    std::map<std::string, std::string> synonyms_;
};

std::string normalize_step1_token(std::string_view raw);

/// The five prompt texts. Step-2 known-dimensions text carries {reference_name} and
/// {reference_dimensions} placeholders.
struct PromptSet {
    std::string p1;
    std::string p2_step1;
    std::string p2_step2_known;
    std::string p2_step2_ruler;
    std::string p2_step2_context;

    static PromptSet defaults();
    /// Reads p1.txt, p2_step1.txt, p2_step2_known.txt, p2_step2_ruler.txt, p2_step2_context.txt.
    /// A single trailing newline per file is dropped.
    static PromptSet load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    /// File name -> SHA-256 of the template text, recorded in run logs.
    std::map<std::string, std::string> hashes() const;
};

class PromptEngine {
public:
    PromptEngine() : PromptEngine(PromptSet::defaults(), ReferenceCatalog::defaults()) {}
    PromptEngine(PromptSet prompts, ReferenceCatalog catalog)
        : prompts_(std::move(prompts)), catalog_(std::move(catalog)) {}

    const std::string& p1_prompt() const { return prompts_.p1; }
    const std::string& p2_step1_prompt() const { return prompts_.p2_step1; }
    Step1Classification classify_step1_answer(std::string_view raw) const { return catalog_.classify(raw); }
    std::string p2_step2_prompt(const ReferenceSpec& spec) const;

    const PromptSet& prompts() const { return prompts_; }
    const ReferenceCatalog& catalog() const { return catalog_; }

private:
    PromptSet prompts_;
    ReferenceCatalog catalog_;
};

std::string build_p1_prompt();
std::string build_p2_step1_prompt();
ReferenceSpec classify_step1_answer(std::string_view raw);
std::string build_p2_step2_prompt(const ReferenceSpec& spec);

/// Full record of one strategy execution for one sample. P1 fills only the step2_* fields.
struct StrategyTrace {
    std::string sample_id;
    Strategy strategy = Strategy::P1;

    std::optional<std::string> step1_prompt;
    std::optional<std::string> step1_raw;
    std::optional<OutcomeStatus> step1_status;
    std::optional<std::string> step1_class;         // resolved class token
    std::optional<std::string> step1_token;         // normalized reply token before synonym mapping
    std::optional<ReferenceClass> step1_reference;  // stratum of the resolved class
    bool step1_degraded = false;                    // step 1 failed; unspecified template used
    bool step1_cached = false;
    int step1_attempts = 0;

    std::string step2_prompt;
    std::optional<std::string> step2_raw;
    OutcomeStatus step2_status = OutcomeStatus::transport_error;
    bool step2_cached = false;
    int step2_attempts = 0;
    std::string step2_detail;

    bool has_step1() const { return step1_prompt.has_value(); }
    bool operator==(const StrategyTrace&) const = default;
};

nlohmann::json trace_to_json(const StrategyTrace& t);
StrategyTrace trace_from_json(const nlohmann::json& j);

struct ExecutionTiming {
    std::int64_t latency_ms = 0;
};

/// Runs P1 (one call) or P2 (classify, then conditioned estimate) for one sample. Gateway failures
/// are recorded in the trace; a failed step 1 degrades to the contextual step-2 template.
StrategyTrace execute_strategy(const std::string& sample_id, std::shared_ptr<const ImagePayload> image,
                               Strategy strategy, Gateway& gateway, const PromptEngine& engine,
                               ExecutionTiming* timing = nullptr);

/// Reads and normalizes the sample image first; an unreadable image yields a failed trace
/// without contacting the endpoint.
StrategyTrace execute_strategy(const std::string& sample_id, const std::filesystem::path& image_path,
                               Strategy strategy, Gateway& gateway, const PromptEngine& engine);

std::shared_ptr<const ImagePayload> load_normalized_image(const std::filesystem::path& path);

} // namespace hailgauge
