#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::filesystem::path fixture(const std::string& name);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// Encoded test image with a deterministic gradient pattern.
std::vector<std::uint8_t> make_jpeg(int width, int height, int seed = 0);
std::vector<std::uint8_t> make_png(int width, int height, int seed = 0);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

} // namespace testsupport

namespace testsupport {

struct MiniSample {
    std::string id;
    double truth_cm = 4.0;
    std::string reference = "hand"; // empty: leave unannotated
    std::string distance = "close_up";
};

struct Workspace {
    std::filesystem::path root;
    std::filesystem::path samples;
    std::filesystem::path annotations;
};

/// Writes images/<id>.jpg, samples.jsonl and annotations.jsonl under `root`.
Workspace make_workspace(const std::filesystem::path& root, const std::vector<MiniSample>& samples);

struct MockModel {
    std::string model_id;
    std::string script_json; // written next to the config as <model_id>.json
};

/// INI run config for mock endpoints over a workspace; returns the config file path.
std::filesystem::path write_mock_config(const Workspace& ws, const std::vector<MockModel>& models,
                                        const std::string& strategies, const std::string& run_id,
                                        int max_concurrency = 1, const std::string& extra_run_keys = "");

} // namespace testsupport
