#include <gtest/gtest.h>

#include <fstream>

#include <httplib.h>

#include "hailgauge/review_server.hpp"
#include "support.hpp"

using namespace hailgauge;
using nlohmann::json;
using testsupport::TempDir;

namespace {

struct Fixture {
    TempDir dir;
    testsupport::Workspace ws;
    RunConfig cfg;

    explicit Fixture(const std::string& script, const std::string& strategies = "P1,P2") {
        ws = testsupport::make_workspace(dir.path(), {{"s1", 3.0},
                                                      {"s2", 4.5, "ruler", "distant"},
                                                      {"s3", 6.0, "fruit", "close_up"},
                                                      {"s4", 2.0, "", ""}});
        cfg = load_run_config(testsupport::write_mock_config(ws, {{"G4", script}}, strategies, "review"));
        run(cfg);
    }

    std::unique_ptr<ReviewService> open(ReviewOptions options = {}) {
        return ReviewService::open(cfg.run_dir(), std::nullopt, std::nullopt, options);
    }
};

const std::string kPerfect = R"({"default": "unspecified", "by_label": {
    "s1/p1": "3.0", "s2/p1": "4.5", "s3/p1": "6", "s4/p1": "2",
    "s1/step2": "3.0", "s2/step2": "4.5", "s3/step2": "6", "s4/step2": "2"}})";

// s3 is underestimated by 2.5 cm under both prompts; s4 is a miss under P1.
const std::string kNoisy = R"({"default": "3.5", "by_label": {
    "s1/step1": "hand", "s2/step1": "Ruler.", "s4/p1": "no idea", "s1/p1": "3.0"}})";

std::map<std::string, std::string> snapshot_files(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out[e.path().string()] = testsupport::read_text(e.path());
    return out;
}

std::vector<std::string> data_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#')
            out.push_back(line);
    return out;
}

} // namespace

TEST(ReviewService, PaginationLimit) {
    Fixture f(kNoisy);
    auto svc = f.open();
    SampleQuery q;
    q.limit = 2;
    auto page = svc->list_samples(q);
    EXPECT_EQ(page["total"], 4);
    ASSERT_EQ(page["items"].size(), 2u);
    EXPECT_EQ(page["items"][0]["sample_id"], "s1");
    q.offset = 3;
    page = svc->list_samples(q);
    ASSERT_EQ(page["items"].size(), 1u);
    EXPECT_EQ(page["items"][0]["sample_id"], "s4");
    q.offset = 10;
    EXPECT_TRUE(svc->list_samples(q)["items"].empty());
}

TEST(ReviewService, ItemShape) {
    Fixture f(kNoisy);
    auto svc = f.open();
    auto item = svc->sample("s1");
    EXPECT_EQ(item["truth_cm"], 3.0);
    EXPECT_EQ(item["image_url"], "/api/images/s1");
    EXPECT_EQ(item["annotation"]["reference"], "hand");
    ASSERT_EQ(item["predictions"].size(), 2u);
    const auto& p2 = item["predictions"][1];
    EXPECT_EQ(p2["strategy"], "P2");
    EXPECT_EQ(p2["step1_class"], "hand");
    EXPECT_TRUE(item["predictions"][0]["step1_class"].is_null());
    EXPECT_TRUE(svc->sample("s4")["annotation"].is_null());
    EXPECT_THROW(svc->sample("nope"), NotFound);
    // No filesystem paths leak into the payload.
    EXPECT_EQ(item.dump().find(f.dir.path().string()), std::string::npos);
}

TEST(ReviewService, ReadYourWrites) {
    Fixture f(kNoisy);
    auto svc = f.open();
    auto out = svc->put_annotation("s4", {{"reference", "ruler"}, {"distance", "close_up"}});
    EXPECT_EQ(out["reference"], "ruler");
    auto item = svc->sample("s4");
    EXPECT_EQ(item["annotation"]["reference"], "ruler");
    EXPECT_EQ(item["annotation"]["distance"], "close_up");
    EXPECT_EQ(item["annotation"]["annotator"], "reviewer");

    SampleQuery rulers;
    rulers.reference = ReferenceClass::ruler;
    auto page = svc->list_samples(rulers);
    EXPECT_EQ(page["total"], 2);

    // The write went to the shared log and survives a reopen.
    auto again = f.open();
    EXPECT_EQ(again->sample("s4")["annotation"]["reference"], "ruler");

    EXPECT_THROW(svc->put_annotation("s4", {{"reference", "spoon"}, {"distance", "close_up"}}), Error);
    EXPECT_THROW(svc->put_annotation("s4", {{"reference", "hand"}}), Error);
    EXPECT_THROW(svc->put_annotation("zz", {{"reference", "hand"}, {"distance", "close_up"}}), NotFound);
}

TEST(ReviewService, OutliersOnPerfectFixtureIsEmpty) {
    Fixture f(kPerfect);
    auto svc = f.open();
    SampleQuery q;
    q.outliers_only = true;
    auto page = svc->list_samples(q);
    EXPECT_EQ(page["total"], 0);
    EXPECT_TRUE(page["items"].empty());
}

TEST(ReviewService, OutliersUseThreshold) {
    Fixture f(kNoisy);
    SampleQuery q;
    q.outliers_only = true;
    // s3: 3.5 vs 6.0 under both prompts; s4 P1 miss scores 0 vs 2.0, which is not above 2.0.
    auto page = f.open()->list_samples(q);
    ASSERT_EQ(page["total"], 1);
    EXPECT_EQ(page["items"][0]["sample_id"], "s3");
    EXPECT_TRUE(page["items"][0]["outlier"]);

    // At 0.4 cm every sample has some prediction off by more: s1 P2 answers 3.5 for 3.0.
    ReviewOptions tight;
    tight.outlier_threshold_cm = 0.4;
    EXPECT_EQ(f.open(tight)->list_samples(q)["total"], 4);
}

TEST(ReviewService, ResidualsMatchMetricsErrors) {
    Fixture f(kNoisy);
    auto svc = f.open();
    const auto& rec = svc->run();
    auto ms = rec.measurements();
    for (auto strategy : {Strategy::P1, Strategy::P2}) {
        std::vector<Measurement> group;
        for (const auto& m : ms)
            if (m.strategy == strategy)
                group.push_back(m);
        auto errors = signed_errors(group, rec.truths(), rec.scoring, rec.value_source);
        for (const auto& pair : errors.pairs) {
            auto item = svc->sample(pair.sample_id);
            bool found = false;
            for (const auto& p : item["predictions"])
                if (p["strategy"] == std::string(to_string(strategy))) {
                    EXPECT_EQ(p["residual_cm"].get<double>(), pair.error) << pair.sample_id;
                    found = true;
                }
            EXPECT_TRUE(found);
        }
    }
    auto s4 = svc->sample("s4")["predictions"][0];
    EXPECT_TRUE(s4["miss"]);
    EXPECT_EQ(s4["pred_cm"], 0.0);
    EXPECT_EQ(s4["residual_cm"], -2.0);
}

TEST(ReviewService, FlagsExportAndDeduplicate) {
    Fixture f(kNoisy);
    auto svc = f.open();
    auto empty_list = f.dir / "none.jsonl";
    svc->export_rerun_list(empty_list);
    EXPECT_TRUE(data_lines(empty_list).empty());
    EXPECT_TRUE(testsupport::read_text(empty_list).starts_with("#"));

    svc->set_flag("s3", json::object());
    svc->set_flag("s1", json::object());
    auto dup = svc->set_flag("s3", json::object());
    EXPECT_EQ(dup["flag_count"], 2);
    svc->set_flag("s2", {{"flagged", true}});
    auto list = f.dir / "rerun.jsonl";
    svc->export_rerun_list(list);
    auto lines = data_lines(list);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(read_rerun_list(list), (std::vector<std::string>{"s1", "s2", "s3"}));
    EXPECT_TRUE(svc->sample("s3")["flagged"]);

    auto cleared = svc->set_flag("s2", {{"flagged", false}});
    EXPECT_FALSE(cleared["flagged"]);
    EXPECT_EQ(svc->flagged(), (std::vector<std::string>{"s1", "s3"}));
    // Flags survive a restart.
    EXPECT_EQ(f.open()->flagged(), (std::vector<std::string>{"s1", "s3"}));
    EXPECT_THROW(svc->set_flag("zz", json::object()), NotFound);
}

TEST(ReviewService, MetricsAndRuns) {
    Fixture f(kNoisy);
    auto svc = f.open();
    auto m = svc->metrics();
    EXPECT_EQ(m["run_id"], "review");
    EXPECT_EQ(m["scoring"], "paper_zero");
    EXPECT_EQ(m["overall"].size(), 2u);
    EXPECT_EQ(m["annotations"]["annotated"], 3);
    EXPECT_EQ(m["annotations"]["unannotated"], 1);
    EXPECT_EQ(m["annotations"]["dataset_size"], 4);
    auto runs = svc->runs();
    ASSERT_EQ(runs.size(), 1u);
    EXPECT_TRUE(runs[0]["current"]);
}

class ReviewHttp : public ::testing::Test {
protected:
    void SetUp() override {
        fixture_ = std::make_unique<Fixture>(kNoisy);
        service_ = std::shared_ptr<ReviewService>(fixture_->open());
        server_ = std::make_unique<ReviewServer>(service_);
        port_ = server_->start();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }
    void TearDown() override { server_->stop(); }

    json get_json(const std::string& path, int expect = 200) {
        auto res = client_->Get(path);
        EXPECT_TRUE(res) << path;
        if (!res)
            return {};
        EXPECT_EQ(res->status, expect) << path;
        return json::parse(res->body);
    }

    std::unique_ptr<Fixture> fixture_;
    std::shared_ptr<ReviewService> service_;
    std::unique_ptr<ReviewServer> server_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

TEST_F(ReviewHttp, SamplesEndpoint) {
    auto page = get_json("/api/samples?limit=2");
    EXPECT_EQ(page["items"].size(), 2u);
    auto rulers = get_json("/api/samples?reference=ruler&distance=distant");
    ASSERT_EQ(rulers["total"], 1);
    EXPECT_EQ(rulers["items"][0]["sample_id"], "s2");
    EXPECT_EQ(get_json("/api/samples?outliers_only=true")["total"], 1);
    EXPECT_EQ(get_json("/api/samples/s2")["truth_cm"], 4.5);
    auto missing = get_json("/api/samples/nope", 404);
    EXPECT_TRUE(missing.contains("error"));
    get_json("/api/samples?reference=spoon", 400);
    get_json("/api/samples?limit=abc", 400);
}

TEST_F(ReviewHttp, ImagesAreServedByIdOnly) {
    auto res = client_->Get("/api/images/s1");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/jpeg");
    EXPECT_EQ(res->body, testsupport::read_text(fixture_->dir / "images/s1.jpg"));
    auto sneaky = client_->Get("/api/images/..%2Fsamples.jsonl");
    ASSERT_TRUE(sneaky);
    EXPECT_EQ(sneaky->status, 404);
}

TEST_F(ReviewHttp, PutThenGetReflectsChange) {
    auto res = client_->Put("/api/annotations/s1", R"({"reference":"ruler","distance":"close_up"})",
                            "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(get_json("/api/samples/s1")["annotation"]["reference"], "ruler");

    auto bad = client_->Put("/api/annotations/s1", "{not json", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto unknown = client_->Put("/api/annotations/zz", R"({"reference":"hand","distance":"close_up"})",
                                "application/json");
    ASSERT_TRUE(unknown);
    EXPECT_EQ(unknown->status, 404);
}

TEST_F(ReviewHttp, FlagsMetricsRunsAndIndex) {
    auto res = client_->Post("/api/flags/s3", "", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["flagged"], true);
    EXPECT_EQ(service_->flagged(), std::vector<std::string>{"s3"});
    EXPECT_EQ(get_json("/api/metrics")["run_id"], "review");
    EXPECT_EQ(get_json("/api/runs").size(), 1u);
    auto index = client_->Get("/");
    ASSERT_TRUE(index);
    EXPECT_EQ(index->status, 200);
    EXPECT_NE(index->body.find("/api/samples"), std::string::npos);
}

TEST_F(ReviewHttp, GetCrawlLeavesFilesUntouched) {
    auto before = snapshot_files(fixture_->dir.path());
    get_json("/api/samples");
    get_json("/api/samples?outliers_only=1&limit=1000");
    for (auto id : {"s1", "s2", "s3", "s4"}) {
        get_json(std::string("/api/samples/") + id);
        client_->Get(std::string("/api/images/") + id);
    }
    get_json("/api/metrics");
    get_json("/api/runs");
    client_->Get("/");
    EXPECT_EQ(snapshot_files(fixture_->dir.path()), before);
}

TEST(ReviewServerBind, PortInUseIsAnError) {
    Fixture f(kNoisy);
    auto svc = std::shared_ptr<ReviewService>(f.open());
    ReviewServer first(svc);
    int port = first.start();
    ReviewServer second(svc);
    EXPECT_THROW(second.start("127.0.0.1", port), Error);
    first.stop();
}

TEST(ReviewServerOpen, InvalidRunDirIsAnError) {
    TempDir dir;
    EXPECT_THROW(ReviewService::open(dir / "nope", std::nullopt, std::nullopt), Error);
}
