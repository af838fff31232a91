#include <algorithm>
#include <cmath>
#include <cstring>
#include <string_view>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hailgauge/gateway.hpp"

namespace hailgauge {

namespace {

constexpr std::string_view kMarker = "hailgauge-normalized:v1";
constexpr int kJpegQuality = 92;

bool is_jpeg(std::span<const std::uint8_t> b) {
    return b.size() >= 4 && b[0] == 0xFF && b[1] == 0xD8;
}

bool is_png(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t kSig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return b.size() >= 8 && std::memcmp(b.data(), kSig, 8) == 0;
}

// Entropy-coded data stuffs 0xFF bytes, so a real EOI must follow the last SOS.
bool jpeg_complete(std::span<const std::uint8_t> b) {
    std::size_t last_sos = 0, last_eoi = 0;
    bool have_sos = false, have_eoi = false;
    for (std::size_t i = 2; i + 1 < b.size(); ++i) {
        if (b[i] != 0xFF)
            continue;
        if (b[i + 1] == 0xDA) {
            last_sos = i;
            have_sos = true;
        } else if (b[i + 1] == 0xD9) {
            last_eoi = i;
            have_eoi = true;
        }
    }
    return have_sos && have_eoi && last_eoi > last_sos;
}

bool png_complete(std::span<const std::uint8_t> b) {
    std::string_view s(reinterpret_cast<const char*>(b.data()), b.size());
    return s.rfind("IEND") != std::string_view::npos;
}

// Offset just past SOI and an immediately following APP0 segment.
std::size_t header_end(std::span<const std::uint8_t> b) {
    std::size_t pos = 2;
    if (b.size() >= 6 && b[2] == 0xFF && b[3] == 0xE0) {
        std::size_t len = (static_cast<std::size_t>(b[4]) << 8) | b[5];
        pos = 4 + len;
    }
    return pos;
}

bool carries_marker(std::span<const std::uint8_t> b) {
    auto pos = header_end(b);
    if (pos + 4 + kMarker.size() > b.size())
        return false;
    if (b[pos] != 0xFF || b[pos + 1] != 0xFE)
        return false;
    std::size_t len = (static_cast<std::size_t>(b[pos + 2]) << 8) | b[pos + 3];
    if (len != kMarker.size() + 2)
        return false;
    return std::memcmp(b.data() + pos + 4, kMarker.data(), kMarker.size()) == 0;
}

cv::Mat decode_checked(std::span<const std::uint8_t> bytes, int flags) {
    if (bytes.empty())
        throw Error("corrupt image");
    if (is_jpeg(bytes) && !jpeg_complete(bytes))
        throw Error("corrupt image");
    if (is_png(bytes) && !png_complete(bytes))
        throw Error("corrupt image");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, flags);
    } catch (const cv::Exception&) {
        throw Error("corrupt image");
    }
    if (img.empty() || img.cols <= 0 || img.rows <= 0)
        throw Error("corrupt image");
    return img;
}

} // namespace

ImageSize decode_image_size(std::span<const std::uint8_t> bytes) {
    auto img = decode_checked(bytes, cv::IMREAD_UNCHANGED);
    return {img.cols, img.rows};
}

std::vector<std::uint8_t> normalize_image(std::span<const std::uint8_t> bytes) {
    auto img = decode_checked(bytes, cv::IMREAD_COLOR);
    if (is_jpeg(bytes) && carries_marker(bytes) && std::max(img.cols, img.rows) <= kMaxImageSide)
        return {bytes.begin(), bytes.end()};

    int longest = std::max(img.cols, img.rows);
    if (longest > kMaxImageSide) {
        double scale = static_cast<double>(kMaxImageSide) / longest;
        int w = img.cols >= img.rows ? kMaxImageSide : std::max(1, static_cast<int>(std::lround(img.cols * scale)));
        int h = img.rows > img.cols ? kMaxImageSide : std::max(1, static_cast<int>(std::lround(img.rows * scale)));
        cv::Mat resized;
        cv::resize(img, resized, cv::Size(w, h), 0, 0, cv::INTER_AREA);
        img = resized;
    }

    std::vector<std::uint8_t> encoded;
    std::vector<int> params = {cv::IMWRITE_JPEG_QUALITY, kJpegQuality, cv::IMWRITE_JPEG_PROGRESSIVE, 0,
                               cv::IMWRITE_JPEG_OPTIMIZE, 0};
    if (!cv::imencode(".jpg", img, encoded, params))
        throw Error("jpeg encoding failed");

    auto pos = header_end(encoded);
    std::vector<std::uint8_t> segment = {0xFF, 0xFE, 0x00, static_cast<std::uint8_t>(kMarker.size() + 2)};
    segment.insert(segment.end(), kMarker.begin(), kMarker.end());
    encoded.insert(encoded.begin() + static_cast<std::ptrdiff_t>(pos), segment.begin(), segment.end());
    return encoded;
}

} // namespace hailgauge
