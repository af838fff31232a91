#include "support.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace testsupport {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
        auto candidate = fs::temp_directory_path() /
                         ("hailgauge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        if (fs::create_directory(candidate)) {
            path_ = candidate;
            return;
        }
    }
    throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

fs::path fixture(const std::string& name) {
    return fs::path(HAILGAUGE_FIXTURE_DIR) / name;
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace {

cv::Mat pattern(int width, int height, int seed) {
    cv::Mat img(height, width, CV_8UC3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>((x + seed) % 256),
                                                static_cast<uchar>((y * 3 + seed) % 256),
                                                static_cast<uchar>((x + y + 7 * seed) % 256));
    return img;
}

} // namespace

std::vector<std::uint8_t> make_jpeg(int width, int height, int seed) {
    std::vector<std::uint8_t> out;
    cv::imencode(".jpg", pattern(width, height, seed), out, {cv::IMWRITE_JPEG_QUALITY, 90});
    return out;
}

std::vector<std::uint8_t> make_png(int width, int height, int seed) {
    std::vector<std::uint8_t> out;
    cv::imencode(".png", pattern(width, height, seed), out);
    return out;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace testsupport

namespace testsupport {

Workspace make_workspace(const fs::path& root, const std::vector<MiniSample>& samples) {
    Workspace ws{root, root / "samples.jsonl", root / "annotations.jsonl"};
    fs::create_directories(root / "images");
    std::string sample_lines, note_lines;
    int seed = 0;
    for (const auto& s : samples) {
        auto image = root / "images" / (s.id + ".jpg");
        write_bytes(image, make_jpeg(48, 36, seed++));
        std::ostringstream line;
        line.precision(17);
        line << R"({"sample_id":")" << s.id << R"(","event_id":"E)" << s.id << R"(","image_path":")"
             << image.generic_string() << R"(","truth_diameter_cm":)" << s.truth_cm << "}\n";
        sample_lines += line.str();
        if (!s.reference.empty())
            note_lines += R"({"sample_id":")" + s.id + R"(","reference":")" + s.reference + R"(","distance":")" +
                          s.distance + R"(","annotator":"fixture","updated_at":"2024-06-01T12:00:00Z"})" + "\n";
    }
    write_text(ws.samples, sample_lines);
    write_text(ws.annotations, note_lines);
    return ws;
}

fs::path write_mock_config(const Workspace& ws, const std::vector<MockModel>& models, const std::string& strategies,
                           const std::string& run_id, int max_concurrency, const std::string& extra_run_keys) {
    std::ostringstream ini;
    ini << "[dataset]\nsamples = " << ws.samples.generic_string() << "\nannotations = "
        << ws.annotations.generic_string() << "\n\n[run]\nrun_id = " << run_id << "\nstrategies = " << strategies
        << "\nmax_concurrency = " << max_concurrency << "\noutput_dir = runs\ncache_dir = cache\n"
        << extra_run_keys << "\n";
    for (const auto& m : models) {
        write_text(ws.root / (m.model_id + ".json"), m.script_json);
        ini << "[endpoints." << m.model_id << "]\nadapter = mock\nretry_base_delay_ms = 0\nmock_script = "
            << m.model_id << ".json\n\n";
    }
    auto path = ws.root / "run.ini";
    write_text(path, ini.str());
    return path;
}

} // namespace testsupport
