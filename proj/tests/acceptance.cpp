// Acceptance checks: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hailgauge/reporting.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace hailgauge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;
};

class Checks {
public:
    void fail(std::string why) {
        if (v_.ok)
            v_.detail = std::move(why);
        v_.ok = false;
    }
    void expect(bool cond, const std::string& why) {
        if (!cond)
            fail(why);
    }
    void note(std::string detail) {
        if (v_.ok)
            v_.detail = std::move(detail);
    }
    Verdict verdict() const { return v_; }

private:
    Verdict v_;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
    // The emitted files only carry plain identifiers, so a comma split is enough here.
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        out[e.path().filename().string()] = read_file(e.path());
    return out;
}

std::string fmt_tenths(int tenths, char sep = '.') {
    return std::to_string(tenths / 10) + sep + std::to_string(tenths % 10);
}

// ---------------------------------------------------------------------------

struct GoldenCell {
    json reply;                   // mock entry for the final step
    std::optional<double> value;  // what a careful reader takes from the reply, in cm
    bool rejected = false;
};

Verdict golden_end_to_end() {
    Checks c;
    const auto started = std::chrono::steady_clock::now();
    testsupport::TempDir dir;
    const std::vector<std::string> models{"CS4", "G4", "G4m", "GFL"};
    const std::vector<Strategy> strategies{Strategy::P1, Strategy::P2};

    std::vector<testsupport::MiniSample> samples;
    std::map<std::string, int> truth_tenths;
    for (int i = 0; i < 20; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "g%02d", i);
        int tenths = 20 + 5 * ((i * 7) % 19); // 2.0 .. 11.0 cm
        truth_tenths[id] = tenths;
        samples.push_back({id, tenths / 10.0, i % 2 ? "hand" : "unspecified_or_other",
                           i % 3 ? "close_up" : "distant"});
    }
    auto ws = testsupport::make_workspace(dir.path(), samples);

    static const char* kStep1[] = {"hand", "Coin.", "ruler", "lighter", "unspecified", "banana"};
    std::mt19937 rng(20240611);
    std::map<std::tuple<std::string, Strategy, std::string>, GoldenCell> expected;
    std::vector<testsupport::MockModel> mocks;
    for (std::size_t m = 0; m < models.size(); ++m) {
        json by_label = json::object();
        for (auto strategy : strategies) {
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto& id = samples[i].id;
                std::uint32_t k = rng();
                int d = -static_cast<int>(k % 26) + 8; // -1.7 .. +0.8 cm, skewed low
                int tenths = truth_tenths[id] + d;
                GoldenCell cell;
                bool miss = models[m] != "GFL" && (i + m + (strategy == Strategy::P2 ? 3 : 0)) % 7 == 0;
                bool rejected = models[m] == "CS4" && i == 5;
                if (rejected) {
                    cell.reply = {{"status", "provider_rejection"}};
                    cell.rejected = true;
                } else if (miss) {
                    cell.reply = "I cannot determine the size of the hailstones from this image.";
                } else {
                    switch ((k / 26) % 4) {
                    case 0: cell.reply = fmt_tenths(tenths); break;
                    case 1:
                        cell.reply = "Looking at the hailstones in the palm of the hand, the largest one is about " +
                                     fmt_tenths(tenths, ',') + " cm in diameter.";
                        break;
                    case 2: cell.reply = std::to_string(tenths) + " mm"; break;
                    default: cell.reply = "Estimated diameter: " + fmt_tenths(tenths) + "cm"; break;
                    }
                    cell.value = tenths / 10.0;
                }
                if (strategy == Strategy::P1) {
                    by_label[id + "/p1"] = cell.reply;
                } else {
                    by_label[id + "/step1"] = kStep1[(i + m) % 6];
                    by_label[id + "/step2"] = cell.reply;
                }
                expected[{models[m], strategy, id}] = cell;
            }
        }
        json script{{"default", {{"status", "provider_rejection"}}}, {"by_label", by_label}};
        mocks.push_back({models[m], script.dump(2)});
    }

    // Oracle: expected Table II rows from the scripted intent alone.
    std::map<std::pair<std::string, std::string>, std::vector<double>> want;
    for (const auto& model : models) {
        for (auto strategy : strategies) {
            std::vector<double> pred, truth;
            std::size_t n = 0, miss = 0;
            for (const auto& s : samples) {
                const auto& cell = expected[{model, strategy, s.id}];
                if (cell.rejected)
                    continue;
                ++n;
                truth.push_back(truth_tenths[s.id] / 10.0);
                if (cell.value) {
                    pred.push_back(oracle::half_cm(*cell.value));
                } else {
                    ++miss;
                    pred.push_back(0.0);
                }
            }
            auto st = oracle::brute_force(pred, truth);
            want[{model, std::string(to_string(strategy))}] = {static_cast<double>(n), st.mae, st.rmse, st.bias,
                                                               st.r.value_or(NAN), static_cast<double>(miss)};
        }
    }

    auto cfg = load_run_config(testsupport::write_mock_config(ws, mocks, "P1,P2", "golden", 4));
    auto report_once = [&] {
        auto rec = run(cfg);
        if (rec.cells.size() != 160)
            c.fail("grid produced " + std::to_string(rec.cells.size()) + " cells, expected 160");
        auto analysis = analyze_run(load_run(cfg.run_dir()), load_annotation_view(ws.annotations));
        return snapshot(write_report(analysis, dir / "report").dir);
    };
    auto first = report_once();
    auto second = report_once();

    auto rows = split_csv(first["metrics.csv"]);
    c.expect(rows.size() == 9, "metrics.csv has " + std::to_string(rows.size()) + " lines");
    double worst = 0.0;
    std::size_t matched = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto it = want.find({row[0], row[1]});
        if (it == want.end() || row.size() != 9) {
            c.fail("unexpected metrics row " + row[0] + " " + row[1]);
            continue;
        }
        const auto& w = it->second;
        c.expect(std::stod(row[3]) == w[0], row[0] + " " + row[1] + ": n " + row[3]);
        c.expect(std::stod(row[8]) == w[5], row[0] + " " + row[1] + ": miss " + row[8]);
        for (int col = 4; col <= 6; ++col)
            worst = std::max(worst, std::fabs(std::stod(row[col]) - w[col - 3]));
        if (std::isnan(w[4]))
            c.expect(row[7] == "NA", row[0] + " " + row[1] + ": r should be undefined");
        else
            worst = std::max(worst, std::fabs(std::stod(row[7]) - w[4]));
        ++matched;
    }
    c.expect(matched == 8, "matched " + std::to_string(matched) + " of 8 groups");
    c.expect(worst <= 1e-9, "max deviation from oracle " + std::to_string(worst));
    c.expect(first == second, "second run produced different report files");

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    c.expect(secs < 10.0, "runtime " + std::to_string(secs) + " s");
    std::ostringstream d;
    d << "160 cells x 2 runs, 8 groups vs oracle, max dev " << worst << ", " << first.size()
      << " report files byte-identical, " << std::fixed << std::setprecision(2) << secs << " s";
    c.note(d.str());
    return c.verdict();
}

Verdict metrics_oracle() {
    Checks c;
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> size(1, 50);
    std::uniform_real_distribution<double> cm(0.0, 12.0);
    std::bernoulli_distribution zero(0.2);
    double worst = 0.0;
    std::size_t ordering_violations = 0;
    for (int t = 0; t < 1000; ++t) {
        int n = size(rng);
        std::vector<double> pred, truth;
        std::vector<ScoredPair> pairs;
        for (int i = 0; i < n; ++i) {
            double p = zero(rng) ? 0.0 : std::round(cm(rng) * 2.0) / 2.0;
            double tr = 2.0 + std::round(cm(rng) * 10.0) / 10.0;
            pred.push_back(p);
            truth.push_back(tr);
            pairs.push_back({"s" + std::to_string(i), p, tr, p - tr});
        }
        auto got = summarize(pairs);
        auto want = oracle::brute_force(pred, truth);
        worst = std::max({worst, std::fabs(got.mae - want.mae), std::fabs(got.rmse - want.rmse),
                          std::fabs(got.bias - want.bias)});
        if (got.pearson_r.has_value() != want.r.has_value())
            c.fail("pearson_r definedness differs on instance " + std::to_string(t));
        else if (want.r)
            worst = std::max(worst, std::fabs(*got.pearson_r - *want.r));
        if (!(got.rmse + 1e-12 >= got.mae && got.mae + 1e-12 >= std::fabs(got.bias)))
            ++ordering_violations;
    }
    c.expect(worst <= 1e-9, "max abs deviation " + std::to_string(worst));
    c.expect(ordering_violations == 0, std::to_string(ordering_violations) + " rmse>=mae>=|bias| violations");
    std::ostringstream d;
    d << "1000 instances, max abs deviation " << worst << ", rmse >= mae >= |bias| on all";
    c.note(d.str());
    return c.verdict();
}

Verdict parser_corpus() {
    Checks c;
    std::ifstream in(testsupport::fixture("parser_corpus.jsonl"));
    std::size_t total = 0, matched = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty())
            continue;
        auto j = json::parse(line);
        StrategyTrace t;
        t.sample_id = "c";
        t.step2_prompt = "p";
        t.step2_status = OutcomeStatus::ok;
        t.step2_raw = j["text"].get<std::string>();
        auto m = to_measurement(t, "m");
        bool ok = parse_miss_reason(j["expected_miss_reason"].get<std::string>()) == m.miss_reason;
        if (j["expected_cm_or_null"].is_null())
            ok = ok && !m.value_cm_rounded;
        else
            ok = ok && m.value_cm_rounded == j["expected_cm_or_null"].get<double>();
        ++total;
        if (ok)
            ++matched;
        else
            c.fail("corpus mismatch on: " + j["text"].get<std::string>());
    }
    c.expect(total == 50, "corpus has " + std::to_string(total) + " entries");

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(0.0, 50.0);
    std::size_t bad = 0;
    for (int i = 0; i < 100000; ++i) {
        double v = dist(rng);
        double r = round_to_half_cm(v);
        if (std::fabs(r - v) > 0.25 || std::fmod(r * 2.0, 1.0) != 0.0 || r != oracle::half_cm(v))
            ++bad;
    }
    c.expect(bad == 0, std::to_string(bad) + " of 1e5 rounding samples off");
    c.note(std::to_string(matched) + "/" + std::to_string(total) +
           " corpus strings exact; 1e5 rounding samples within 0.25 cm and on the 0.5 grid");
    return c.verdict();
}

Verdict prompt_fidelity() {
    Checks c;
    auto has = [&](const std::string& text, const std::string& anchor, const std::string& what) {
        c.expect(text.find(anchor) != std::string::npos, what + " lacks \"" + anchor + "\"");
    };
    has(build_p1_prompt(), "Answer only with the diameter in cm", "P1");
    has(build_p2_step1_prompt(), "your answer has to be 'unspecified'", "P2 step 1");
    has(build_p2_step2_prompt(classify_step1_answer("ruler")), "markings on the ruler", "ruler template");
    has(build_p2_step2_prompt(classify_step1_answer("unspecified")), "contextual cues in the image",
        "contextual template");

    std::size_t enumerated = 0;
    const auto catalog = ReferenceCatalog::defaults();
    for (const auto& spec : catalog.specs()) {
        auto routed = classify_step1_answer(spec.class_token);
        c.expect(routed == spec, spec.class_token + " does not route to itself");
        auto text = build_p2_step2_prompt(routed);
        switch (spec.family) {
        case Step2Family::known_dimensions:
            has(text, "using the " + spec.display_name + " as a reference", spec.class_token);
            has(text, spec.typical_dimensions_text, spec.class_token);
            break;
        case Step2Family::ruler: has(text, "markings on the ruler", spec.class_token); break;
        case Step2Family::contextual: has(text, "contextual cues in the image", spec.class_token); break;
        }
        ++enumerated;
    }
    for (const auto& [synonym, token] : catalog.synonyms()) {
        c.expect(classify_step1_answer(synonym).class_token == token, "synonym " + synonym);
        ++enumerated;
    }
    for (auto token : {"hand", "coin", "lighter"}) {
        auto spec = classify_step1_answer(token);
        c.expect(spec.class_token == token && spec.family == Step2Family::known_dimensions,
                 std::string(token) + " is not routed to the known-dimensions template");
    }
    for (auto unknown : {"snowball", "", "42", "car", "Unspecified."}) {
        auto spec = classify_step1_answer(unknown);
        c.expect(spec.class_token == "unspecified" && spec.family == Step2Family::contextual,
                 std::string("'") + unknown + "' did not fall back to unspecified");
    }
    c.note("4 anchors verbatim; " + std::to_string(enumerated) +
           " catalogue tokens and synonyms routed; unknown tokens fall back to unspecified");
    return c.verdict();
}

Verdict miss_accounting() {
    Checks c;
    testsupport::TempDir dir;
    // Table II miss column at 1/10 scale over 47 samples.
    const std::map<std::pair<std::string, std::string>, std::size_t> target{
        {{"CS4", "P1"}, 2}, {{"G4", "P1"}, 16}, {{"G4m", "P1"}, 11}, {{"GFL", "P1"}, 0},
        {{"CS4", "P2"}, 1}, {{"G4", "P2"}, 1},  {{"G4m", "P2"}, 0},  {{"GFL", "P2"}, 0}};

    std::vector<testsupport::MiniSample> samples;
    std::vector<std::string> distant_first, close;
    for (int i = 0; i < 47; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "m%02d", i);
        bool distant = i % 3 == 0;
        samples.push_back({id, 2.0 + 0.5 * (i % 10), "hand", distant ? "distant" : "close_up"});
        (distant ? distant_first : close).push_back(id);
    }
    const std::size_t distant_count = distant_first.size();
    distant_first.insert(distant_first.end(), close.begin(), close.end());
    const std::string failed_sample = close.back(); // CS4 rejects this image under both prompts
    auto ws = testsupport::make_workspace(dir.path(), samples);

    std::vector<testsupport::MockModel> mocks;
    for (auto model : {"CS4", "G4", "G4m", "GFL"}) {
        json by_label = json::object();
        for (auto [strategy, suffix] : {std::pair{"P1", "/p1"}, std::pair{"P2", "/step2"}}) {
            std::size_t misses = target.at({model, strategy});
            for (std::size_t k = 0; k < misses; ++k)
                by_label[distant_first[k] + suffix] = "Sorry, the hailstones are too far away to estimate.";
            if (std::string(model) == "CS4")
                by_label[failed_sample + suffix] = {{"status", "provider_rejection"}};
        }
        mocks.push_back({model, json{{"default", "3.5"}, {"by_label", by_label}}.dump()});
    }
    auto cfg = load_run_config(testsupport::write_mock_config(ws, mocks, "P1,P2", "misses", 4));
    run(cfg);
    auto analysis = analyze_run(load_run(cfg.run_dir()), load_annotation_view(ws.annotations));
    auto bundle = write_report(analysis, dir / "report");

    // Miss column of metrics.csv.
    std::size_t p1_total = 0, p2_total = 0;
    for (const auto& row : split_csv(read_file(bundle.dir / "metrics.csv"))) {
        if (row.size() != 9 || row[0] == "model")
            continue;
        auto want = target.at({row[0], row[1]});
        c.expect(std::stoul(row[8]) == want, row[0] + " " + row[1] + " Miss column " + row[8]);
        std::size_t n_want = row[0] == "CS4" ? 46 : 47;
        c.expect(std::stoul(row[3]) == n_want, row[0] + " " + row[1] + " n " + row[3]);
        (row[1] == "P1" ? p1_total : p2_total) += std::stoul(row[8]);
    }
    // Bars of fig_miss.svg.
    auto svg = read_file(bundle.dir / "fig_miss.svg");
    std::regex bar_re(R"re(<g class="bar" data-model="([^"]+)" data-strategy="(P[12])" data-total="(\d+)">)re");
    std::size_t bars = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), bar_re); it != std::sregex_iterator(); ++it) {
        auto want = target.at({(*it)[1], (*it)[2]});
        c.expect(std::stoul((*it)[3]) == want, std::string((*it)[1]) + " " + std::string((*it)[2]) + " bar");
        ++bars;
    }
    c.expect(bars == 8, std::to_string(bars) + " miss bars drawn");
    for (const auto& bar : analysis.misses)
        if (bar.model_id == "G4" && bar.strategy == Strategy::P1)
            c.expect(bar.distant == distant_count && bar.close_up == 0, "G4 P1 misses not all distant");
    c.expect(p2_total < p1_total, "P2 misses not below P1");
    c.note("Miss column and Fig. 3 bars match the script (G4-P1 16, G4m-P1 11, GFL 0); P1 total " +
           std::to_string(p1_total) + " > P2 total " + std::to_string(p2_total) +
           "; CS4 rejection excluded from n and Miss");
    return c.verdict();
}

Verdict stratification() {
    Checks c;
    testsupport::TempDir dir;
    // hand errors 0.5/1.0/0.5/1.0 -> 0.75. Truths sit on the 0.5 cm grid, so the unspecified
    // stratum needs 100 samples: 54 off by 1.5 and 46 off by 2.0 -> 1.73. One fruit sample.
    std::vector<testsupport::MiniSample> samples{
        {"h1", 4.0, "hand"}, {"h2", 4.0, "hand"}, {"h3", 3.0, "hand"}, {"h4", 3.0, "hand"}, {"f1", 4.0, "fruit"}};
    std::map<std::string, std::string> replies{
        {"h1", "3.5"}, {"h2", "3.0"}, {"h3", "3.5"}, {"h4", "4.0"}, {"f1", "4.5"}};
    for (int i = 0; i < 100; ++i) {
        auto id = "u" + std::to_string(i);
        samples.push_back({id, 4.0, "unspecified_or_other", "distant"});
        replies[id] = i < 54 ? "2.5" : "2.0";
    }
    json by_label = json::object();
    for (const auto& [id, text] : replies) {
        by_label[id + "/step1"] = id[0] == 'h' ? "hand" : "unspecified";
        by_label[id + "/step2"] = text;
    }
    auto ws = testsupport::make_workspace(dir.path(), samples);
    auto cfg = load_run_config(testsupport::write_mock_config(
        ws, {{"G4", json{{"by_label", by_label}}.dump()}}, "P2", "strata"));
    run(cfg);
    auto analysis = analyze_run(load_run(cfg.run_dir()), load_annotation_view(ws.annotations));
    auto bundle = write_report(analysis, dir / "report");

    std::map<std::string, std::vector<std::string>> manual;
    for (const auto& row : split_csv(read_file(bundle.dir / "refobj.csv")))
        if (row.size() == 11 && row[0] == "reference_manual")
            manual[row[3]] = row;
    auto mae = [&](const std::string& s) { return manual.count(s) ? std::stod(manual[s][5]) : NAN; };
    c.expect(std::fabs(mae("hand") - 0.75) <= 1e-9, "hand MAE " + std::to_string(mae("hand")));
    c.expect(std::fabs(mae("unspecified_or_other") - 1.73) <= 1e-9,
             "unspecified MAE " + std::to_string(mae("unspecified_or_other")));
    std::size_t flagged = 0;
    for (const auto& [stratum, row] : manual) {
        bool single = row[4] == "1";
        c.expect((row[10] == "true") == single, stratum + " flag does not match n");
        flagged += single;
    }
    c.expect(flagged == 1 && manual["fruit"][10] == "true", "fruit stratum not flagged");
    c.expect(read_file(bundle.dir / "fig_refbar.svg").find("single sample; result not generalizable") !=
                 std::string::npos,
             "refbar footnote missing");
    c.note("hand MAE " + manual["hand"][5] + ", unspecified MAE " + manual["unspecified_or_other"][5] +
           ", n = 1 fruit stratum flagged in refobj.csv and fig_refbar.svg");
    return c.verdict();
}

Verdict resumability() {
    Checks c;
    testsupport::TempDir dir;
    std::vector<testsupport::MiniSample> samples;
    for (int i = 0; i < 6; ++i)
        samples.push_back({"r" + std::to_string(i), 2.0 + i, "hand"});
    auto ws = testsupport::make_workspace(dir.path(), samples);
    auto cfg = load_run_config(testsupport::write_mock_config(
        ws, {{"A", R"({"default": "3.5", "by_label": {"r1/step1": "hand"}})"}, {"B", R"({"default": "about 45 mm"})"}},
        "P1,P2", "resume", 1));

    std::map<std::string, std::shared_ptr<MockBackend>> mocks;
    auto hooks_for = [](std::map<std::string, std::shared_ptr<MockBackend>>& pool) {
        RunHooks h;
        h.backend_factory = [&pool](const ModelEndpoint& ep) -> std::shared_ptr<Backend> {
            auto& m = pool[ep.model_id];
            if (!m)
                m = MockBackend::from_file(*ep.mock_script);
            return m;
        };
        return h;
    };
    auto calls = [](const std::map<std::string, std::shared_ptr<MockBackend>>& pool) {
        std::size_t n = 0;
        for (const auto& [id, m] : pool)
            n += m->call_count();
        return n;
    };

    auto killed_hooks = hooks_for(mocks);
    killed_hooks.stop_after_cells = 10;
    auto killed = run(cfg, killed_hooks);
    c.expect(killed.interrupted && killed.cells.size() == 10, "kill did not stop the grid at 10 cells");
    auto resumed = run(cfg, hooks_for(mocks));
    const std::size_t live = calls(mocks);

    const std::size_t grid = 2 * 2 * samples.size();
    const std::size_t distinct = 2 * samples.size() * 3; // P1 sends one request, P2 two
    c.expect(resumed.cells.size() == grid && !resumed.interrupted, "resumed run incomplete");
    c.expect(live == distinct, "live calls " + std::to_string(live) + ", distinct requests " +
                                   std::to_string(distinct));

    auto clean_cfg = cfg;
    clean_cfg.run_id = "clean";
    clean_cfg.cache_dir = dir / "clean-cache";
    std::map<std::string, std::shared_ptr<MockBackend>> clean_mocks;
    auto clean = run(clean_cfg, hooks_for(clean_mocks));
    c.expect(calls(clean_mocks) == live, "uninterrupted run made a different number of calls");
    auto csv_of = [](const RunRecord& r) {
        return metrics_csv(evaluate_groups(r.measurements(), r.truths(), r.scoring, r.value_source));
    };
    c.expect(csv_of(load_run(cfg.run_dir())) == csv_of(clean), "resumed metrics differ from uninterrupted run");

    // P1-only grid: one request per cell, so live calls equal the grid size.
    auto p1 = load_run_config(testsupport::write_mock_config(ws, {{"A", R"({"default": "3.0"})"}}, "P1", "p1only"));
    p1.cache_dir = dir / "p1-cache";
    std::map<std::string, std::shared_ptr<MockBackend>> p1_mocks;
    auto p1_killed = hooks_for(p1_mocks);
    p1_killed.stop_after_cells = 3;
    run(p1, p1_killed);
    auto p1_done = run(p1, hooks_for(p1_mocks));
    c.expect(calls(p1_mocks) == p1_done.cells.size() && p1_done.cells.size() == samples.size(),
             "P1 grid live calls " + std::to_string(calls(p1_mocks)));

    c.note("killed at 10/" + std::to_string(grid) + " cells, resumed; live calls " + std::to_string(live) +
           " = distinct requests (P1-only grid: calls = grid size " + std::to_string(samples.size()) +
           "); metrics identical to uninterrupted run");
    return c.verdict();
}

Verdict dataset_stats() {
    Checks c;
    testsupport::TempDir dir;
    auto table = load_events(testsupport::fixture("events_521.csv"));
    auto jpeg = testsupport::make_jpeg(8, 8);
    for (const auto& ev : table.events)
        for (const auto& ref : ev.image_refs)
            testsupport::write_bytes(dir / ref, jpeg);
    auto set = build_samples(table.events, dir.path());
    auto view = load_annotation_view(testsupport::fixture("annotations_474.jsonl"));
    auto stats = compute_stats(set.samples, [&](const std::string& id) -> std::optional<DistanceClass> {
        auto it = view.find(id);
        return it == view.end() ? std::nullopt : std::optional(it->second.distance);
    });
    c.expect(std::fabs(stats.mean_cm - 4.17) <= 0.05, "mean " + std::to_string(stats.mean_cm));
    c.expect(stats.min_cm == 2.0, "min " + std::to_string(stats.min_cm));
    c.expect(stats.max_cm == 11.0, "max " + std::to_string(stats.max_cm));
    c.expect(std::fabs(stats.close_up_fraction - 0.774) <= 0.005,
             "close-up fraction " + std::to_string(stats.close_up_fraction));
    std::ostringstream d;
    d << std::fixed << std::setprecision(4) << "n " << stats.n << ", mean " << stats.mean_cm << " cm, min "
      << stats.min_cm << ", max " << stats.max_cm << ", close-up fraction " << stats.close_up_fraction;
    c.note(d.str());
    return c.verdict();
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"golden_end_to_end", golden_end_to_end},
        {"metrics_oracle_equivalence", metrics_oracle},
        {"parser_corpus_and_rounding", parser_corpus},
        {"prompt_fidelity", prompt_fidelity},
        {"miss_accounting", miss_accounting},
        {"stratification", stratification},
        {"resumability", resumability},
        {"dataset_stats", dataset_stats},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (v.ok ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
        failures += v.ok ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
