#include "cyclepref/core/hash.hpp"

#include <openssl/evp.h>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::core {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string Digest::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Digest Digest::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw InvalidInput("digest hex must be 64 characters, got " + std::to_string(hex.size()));
  Digest d;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw InvalidInput("invalid hex digit in digest");
    d.bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return d;
}

std::uint64_t Digest::prefix64() const {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

struct Hasher::Impl {
  EVP_MD_CTX* ctx = nullptr;
  ~Impl() { EVP_MD_CTX_free(ctx); }
};

Hasher::Hasher() : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_MD_CTX_new();
  if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 init failed");
  }
}

Hasher::~Hasher() = default;

Hasher& Hasher::update(std::string_view data) {
  EVP_DigestUpdate(impl_->ctx, data.data(), data.size());
  return *this;
}

Hasher& Hasher::update(const Digest& d) {
  EVP_DigestUpdate(impl_->ctx, d.bytes.data(), d.bytes.size());
  return *this;
}

Hasher& Hasher::update_u64(std::uint64_t v) {
  std::array<std::uint8_t, 8> le{};
  for (auto& b : le) {
    b = static_cast<std::uint8_t>(v & 0xff);
    v >>= 8;
  }
  EVP_DigestUpdate(impl_->ctx, le.data(), le.size());
  return *this;
}

Digest Hasher::finish() {
  Digest d;
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, d.bytes.data(), &len);
  return d;
}

Digest canonical_hash(std::span<const std::uint8_t> payload) {
  if (payload.empty()) throw InvalidInput("cannot hash an empty payload");
  Hasher h;
  h.update(std::string_view(reinterpret_cast<const char*>(payload.data()), payload.size()));
  return h.finish();
}

Digest canonical_hash(std::string_view payload) {
  return canonical_hash(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

}  // namespace cyclepref::core
