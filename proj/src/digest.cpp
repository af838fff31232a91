#include "hailgauge/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace hailgauge {

namespace {

std::string to_hex(const unsigned char* data, unsigned int len) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kDigits[data[i] >> 4]);
        out.push_back(kDigits[data[i] & 0x0f]);
    }
    return out;
}

} // namespace

struct FieldHasher::Impl {
    EVP_MD_CTX* ctx = nullptr;
};

FieldHasher::FieldHasher() : impl_(new Impl) {
    impl_->ctx = EVP_MD_CTX_new();
    if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(impl_->ctx);
        delete impl_;
        throw std::runtime_error("sha256 init failed");
    }
}

FieldHasher::~FieldHasher() {
    EVP_MD_CTX_free(impl_->ctx);
    delete impl_;
}

void FieldHasher::update(const void* data, std::size_t len) {
    EVP_DigestUpdate(impl_->ctx, data, len);
}

FieldHasher& FieldHasher::field(std::string_view text) {
    std::uint64_t len = text.size();
    std::array<unsigned char, 8> prefix{};
    for (int i = 0; i < 8; ++i)
        prefix[i] = static_cast<unsigned char>(len >> (8 * i));
    update(prefix.data(), prefix.size());
    update(text.data(), text.size());
    return *this;
}

FieldHasher& FieldHasher::field(std::span<const std::uint8_t> bytes) {
    return field(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string FieldHasher::hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(impl_->ctx, md.data(), &len);
    return to_hex(md.data(), len);
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr);
    return to_hex(md.data(), len);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                            static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

} // namespace hailgauge
