#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace hailgauge {

/// Incremental SHA-256 over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
class FieldHasher {
public:
    FieldHasher();
    ~FieldHasher();
    FieldHasher(const FieldHasher&) = delete;
    FieldHasher& operator=(const FieldHasher&) = delete;

    FieldHasher& field(std::string_view text);
    FieldHasher& field(std::span<const std::uint8_t> bytes);
    std::string hex();

private:
    void update(const void* data, std::size_t len);
    struct Impl;
    Impl* impl_;
};

std::string sha256_hex(std::string_view data);
std::string base64_encode(std::span<const std::uint8_t> bytes);

} // namespace hailgauge
