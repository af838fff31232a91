#include "hailgauge/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hailgauge/digest.hpp"

namespace hailgauge {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kP1 =
    "What is the maximum diameter of the hailstones in this image? Answer only with the diameter in cm as a "
    "float number.";

constexpr std::string_view kP2Step1 =
    "I am a climate researcher who deals with hail. Analyze this image of hailstones and check whether there is a "
    "reference object that can be used to identify the size of the hailstones. Answer only with one word. If you "
    "cannot recognize a reference object that is suitable, your answer has to be 'unspecified'. Examples: hand, "
    "coin, ruler, lighter.";

constexpr std::string_view kP2Step2Known =
    "Analyze the image and determine the maximum diameter of the hailstones using the {reference_name} as a "
    "reference. Use the known dimensions of the {reference_name}, {reference_dimensions}, to estimate the "
    "hailstone diameter. Return only the estimated diameter as a float in centimeters without any text.";

constexpr std::string_view kP2Step2Ruler =
    "Analyze the image and determine the maximum diameter of the hailstones using the visible ruler as a "
    "reference. Directly measure the size of the hailstones from the markings on the ruler and return only the "
    "estimated diameter as float in centimeters without any text.";

constexpr std::string_view kP2Step2Context =
    "Analyze the image and estimate the maximum diameter of the hailstones. Use contextual cues in the image, "
    "such as surrounding objects, surfaces, or environmental features to approximate the diameter of the "
    "hailstones. Return only the estimated diameter as float in centimeters without any text.";

struct TemplateFile {
    const char* name;
    std::string PromptSet::*member;
};

constexpr TemplateFile kTemplateFiles[] = {
    {"p1.txt", &PromptSet::p1},
    {"p2_step1.txt", &PromptSet::p2_step1},
    {"p2_step2_known.txt", &PromptSet::p2_step2_known},
    {"p2_step2_ruler.txt", &PromptSet::p2_step2_ruler},
    {"p2_step2_context.txt", &PromptSet::p2_step2_context},
};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

} // namespace

// ---------------------------------------------------------------------------

ReferenceCatalog ReferenceCatalog::defaults() {
    ReferenceCatalog c;
    c.specs_ = {
        {"hand", "hand", "an average adult palm width of about 8.5 cm", 8.5, Step2Family::known_dimensions,
         ReferenceClass::hand},
        {"coin", "coin", "a typical coin diameter of about 2.5 cm", 2.5, Step2Family::known_dimensions,
         ReferenceClass::coin_or_bottle_cap},
        {"lighter", "lighter", "a disposable lighter height of about 8 cm", 8.0, Step2Family::known_dimensions,
         ReferenceClass::small_household_object},
        {"bottlecap", "bottle cap", "a bottle cap diameter of about 3 cm", 3.0, Step2Family::known_dimensions,
         ReferenceClass::coin_or_bottle_cap},
        {"ruler", "ruler", "", 30.0, Step2Family::ruler, ReferenceClass::ruler},
        {"unspecified", "unspecified", "", 0.0, Step2Family::contextual, ReferenceClass::unspecified_or_other},
    };
    c.synonyms_ = {
        {"palm", "hand"},      {"fingers", "hand"},     {"finger", "hand"},   {"hands", "hand"},
        {"cent", "coin"},      {"euro", "coin"},        {"quarter", "coin"},  {"coins", "coin"},
        {"cap", "bottlecap"},  {"bottle", "bottlecap"}, {"caps", "bottlecap"},
        {"tape", "ruler"},     {"measuring", "ruler"},  {"rulers", "ruler"},
        {"lighters", "lighter"},
    };
    return c;
}

const ReferenceSpec& ReferenceCatalog::unspecified() const {
    return *find("unspecified");
}

const ReferenceSpec* ReferenceCatalog::find(std::string_view class_token) const {
    for (const auto& s : specs_)
        if (s.class_token == class_token)
            return &s;
    return nullptr;
}

void ReferenceCatalog::set_dimensions(std::string_view class_token, std::string text) {
    for (auto& s : specs_) {
        if (s.class_token == class_token) {
            if (s.family != Step2Family::known_dimensions)
                throw Error("reference object '" + s.class_token + "' takes no dimensions text");
            s.typical_dimensions_text = std::move(text);
            return;
        }
    }
    throw Error("unknown reference object '" + std::string(class_token) + "'");
}

std::string normalize_step1_token(std::string_view raw) {
    std::string cleaned;
    cleaned.reserve(raw.size());
    for (char ch : raw) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c))
            cleaned.push_back(' ');
        else if (std::isalnum(c) || c >= 0x80)
            cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
    auto start = cleaned.find_first_not_of(' ');
    if (start == std::string::npos)
        return {};
    auto end = cleaned.find(' ', start);
    return cleaned.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

Step1Classification ReferenceCatalog::classify(std::string_view raw) const {
    Step1Classification out;
    out.token = normalize_step1_token(raw);
    std::string key = out.token;
    if (auto it = synonyms_.find(key); it != synonyms_.end())
        key = it->second;
    if (const auto* spec = find(key); spec && key != "unspecified") {
        out.spec = *spec;
        out.recognized = true;
    } else {
        out.spec = unspecified();
    }
    return out;
}

// ---------------------------------------------------------------------------

PromptSet PromptSet::defaults() {
    return {std::string(kP1), std::string(kP2Step1), std::string(kP2Step2Known), std::string(kP2Step2Ruler),
            std::string(kP2Step2Context)};
}

PromptSet PromptSet::load(const fs::path& dir) {
    PromptSet set;
    for (const auto& f : kTemplateFiles) {
        std::ifstream in(dir / f.name, std::ios::binary);
        if (!in)
            throw Error("missing prompt template " + (dir / f.name).string());
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        if (text.ends_with("\r\n"))
            text.resize(text.size() - 2);
        else if (text.ends_with('\n'))
            text.pop_back();
        if (text.empty())
            throw Error("empty prompt template " + (dir / f.name).string());
        set.*(f.member) = std::move(text);
    }
    return set;
}

void PromptSet::save(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& f : kTemplateFiles) {
        std::ofstream out(dir / f.name, std::ios::binary | std::ios::trunc);
        out << this->*(f.member);
    }
}

std::map<std::string, std::string> PromptSet::hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& f : kTemplateFiles)
        out[f.name] = sha256_hex(this->*(f.member));
    return out;
}

std::string PromptEngine::p2_step2_prompt(const ReferenceSpec& spec) const {
    switch (spec.family) {
    case Step2Family::ruler:
        return prompts_.p2_step2_ruler;
    case Step2Family::contextual:
        return prompts_.p2_step2_context;
    case Step2Family::known_dimensions:
    default: {
        std::string text = prompts_.p2_step2_known;
        replace_all(text, "{reference_name}", spec.display_name);
        replace_all(text, "{reference_dimensions}", spec.typical_dimensions_text);
        return text;
    }
    }
}

std::string build_p1_prompt() {
    return std::string(kP1);
}

std::string build_p2_step1_prompt() {
    return std::string(kP2Step1);
}

ReferenceSpec classify_step1_answer(std::string_view raw) {
    static const ReferenceCatalog catalog = ReferenceCatalog::defaults();
    return catalog.classify(raw).spec;
}

std::string build_p2_step2_prompt(const ReferenceSpec& spec) {
    static const PromptEngine engine;
    return engine.p2_step2_prompt(spec);
}

// ---------------------------------------------------------------------------

nlohmann::json trace_to_json(const StrategyTrace& t) {
    nlohmann::ordered_json j;
    j["sample_id"] = t.sample_id;
    j["strategy"] = std::string(to_string(t.strategy));
    if (t.has_step1()) {
        j["step1_prompt"] = *t.step1_prompt;
        if (t.step1_raw)
            j["step1_raw"] = *t.step1_raw;
        j["step1_status"] = std::string(to_string(t.step1_status.value_or(OutcomeStatus::transport_error)));
        j["step1_class"] = t.step1_class.value_or("unspecified");
        j["step1_token"] = t.step1_token.value_or("");
        j["step1_reference"] =
            std::string(to_string(t.step1_reference.value_or(ReferenceClass::unspecified_or_other)));
        j["step1_degraded"] = t.step1_degraded;
        j["step1_cached"] = t.step1_cached;
        j["step1_attempts"] = t.step1_attempts;
    }
    j["step2_prompt"] = t.step2_prompt;
    if (t.step2_raw)
        j["step2_raw"] = *t.step2_raw;
    j["step2_status"] = std::string(to_string(t.step2_status));
    j["step2_cached"] = t.step2_cached;
    j["step2_attempts"] = t.step2_attempts;
    if (!t.step2_detail.empty())
        j["step2_detail"] = t.step2_detail;
    return j;
}

StrategyTrace trace_from_json(const nlohmann::json& j) {
    StrategyTrace t;
    t.sample_id = j.at("sample_id").get<std::string>();
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy)
        throw Error("trace has invalid strategy");
    t.strategy = *strategy;
    auto status = [](const nlohmann::json& v) {
        auto s = parse_outcome_status(v.get<std::string>());
        if (!s)
            throw Error("trace has invalid status");
        return *s;
    };
    if (j.contains("step1_prompt")) {
        t.step1_prompt = j.at("step1_prompt").get<std::string>();
        if (j.contains("step1_raw"))
            t.step1_raw = j.at("step1_raw").get<std::string>();
        t.step1_status = status(j.at("step1_status"));
        t.step1_class = j.at("step1_class").get<std::string>();
        t.step1_token = j.value("step1_token", std::string{});
        t.step1_reference = parse_reference_class(j.value("step1_reference", std::string("unspecified_or_other")));
        t.step1_degraded = j.value("step1_degraded", false);
        t.step1_cached = j.value("step1_cached", false);
        t.step1_attempts = j.value("step1_attempts", 0);
    }
    t.step2_prompt = j.at("step2_prompt").get<std::string>();
    if (j.contains("step2_raw"))
        t.step2_raw = j.at("step2_raw").get<std::string>();
    t.step2_status = status(j.at("step2_status"));
    t.step2_cached = j.value("step2_cached", false);
    t.step2_attempts = j.value("step2_attempts", 0);
    t.step2_detail = j.value("step2_detail", std::string{});
    return t;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const ImagePayload> load_normalized_image(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read image " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto payload = std::make_shared<ImagePayload>();
    payload->bytes = normalize_image(bytes);
    payload->media_type = "image/jpeg";
    return payload;
}

StrategyTrace execute_strategy(const std::string& sample_id, std::shared_ptr<const ImagePayload> image,
                               Strategy strategy, Gateway& gateway, const PromptEngine& engine,
                               ExecutionTiming* timing) {
    StrategyTrace t;
    t.sample_id = sample_id;
    t.strategy = strategy;
    const auto& ep = gateway.endpoint();
    std::int64_t latency = 0;

    ReferenceSpec conditioned = engine.catalog().unspecified();
    if (strategy == Strategy::P2) {
        t.step1_prompt = engine.p2_step1_prompt();
        auto outcome = gateway.send(make_request(ep, *t.step1_prompt, image, sample_id + "/step1"));
        latency += outcome.latency_ms;
        t.step1_status = outcome.status;
        t.step1_cached = outcome.cached;
        t.step1_attempts = outcome.attempt_count;
        if (outcome.status == OutcomeStatus::ok) {
            t.step1_raw = outcome.raw_text;
            auto cls = engine.classify_step1_answer(*outcome.raw_text);
            conditioned = cls.spec;
            t.step1_token = cls.token;
        } else {
            t.step1_degraded = true;
            t.step1_token = std::string{};
        }
        t.step1_class = conditioned.class_token;
        t.step1_reference = conditioned.stratum;
        t.step2_prompt = engine.p2_step2_prompt(conditioned);
    } else {
        t.step2_prompt = engine.p1_prompt();
    }

    auto outcome = gateway.send(make_request(ep, t.step2_prompt, image,
                                             sample_id + (strategy == Strategy::P2 ? "/step2" : "/p1")));
    latency += outcome.latency_ms;
    t.step2_status = outcome.status;
    t.step2_raw = outcome.raw_text;
    t.step2_cached = outcome.cached;
    t.step2_attempts = outcome.attempt_count;
    t.step2_detail = outcome.detail;
    if (timing)
        timing->latency_ms = latency;
    return t;
}

StrategyTrace execute_strategy(const std::string& sample_id, const fs::path& image_path, Strategy strategy,
                               Gateway& gateway, const PromptEngine& engine) {
    std::shared_ptr<const ImagePayload> image;
    try {
        image = load_normalized_image(image_path);
    } catch (const Error& e) {
        StrategyTrace t;
        t.sample_id = sample_id;
        t.strategy = strategy;
        if (strategy == Strategy::P2) {
            t.step1_prompt = engine.p2_step1_prompt();
            t.step1_status = OutcomeStatus::provider_rejection;
            t.step1_degraded = true;
            t.step1_class = engine.catalog().unspecified().class_token;
            t.step1_token = std::string{};
            t.step1_reference = ReferenceClass::unspecified_or_other;
            t.step2_prompt = engine.p2_step2_prompt(engine.catalog().unspecified());
        } else {
            t.step2_prompt = engine.p1_prompt();
        }
        t.step2_status = OutcomeStatus::provider_rejection;
        t.step2_detail = e.what();
        return t;
    }
    return execute_strategy(sample_id, std::move(image), strategy, gateway, engine);
}

} // namespace hailgauge
