#include <fstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hailgauge/dataset.hpp"

namespace hailgauge {

namespace fs = std::filesystem;

FetchReport fetch_images(std::span<const HailEvent> events, const fs::path& image_dir) {
    fs::create_directories(image_dir);
    FetchReport report;
    for (const auto& ev : events) {
        for (const auto& ref : ev.image_refs) {
            if (!is_remote_ref(ref))
                continue;
            auto target = image_dir / fetched_image_name(ref);
            if (fs::exists(target)) {
                ++report.already_present;
                continue;
            }
            auto scheme_end = ref.find("://");
            auto path_start = ref.find('/', scheme_end + 3);
            std::string origin = ref.substr(0, path_start);
            std::string path = path_start == std::string::npos ? "/" : ref.substr(path_start);

            httplib::Client client(origin);
            client.set_follow_location(true);
            client.set_connection_timeout(10);
            client.set_read_timeout(30);
            auto res = client.Get(path);
            if (!res || res->status != 200) {
                std::string why = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
                spdlog::warn("fetch failed for {}: {}", ref, why);
                report.failures.push_back(ref + ": " + why);
                continue;
            }
            auto tmp = target;
            tmp += ".part";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
            }
            fs::rename(tmp, target);
            ++report.downloaded;
        }
    }
    return report;
}

} // namespace hailgauge
