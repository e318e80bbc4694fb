#pragma once

#include <array>
#include <compare>
#include <memory>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cyclepref::core {

// 256-bit SHA-256 digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  static Digest from_hex(std::string_view hex);

  // First 8 bytes as a little-endian integer; used for seeding and bucketing.
  std::uint64_t prefix64() const;

  auto operator<=>(const Digest&) const = default;
};

// Throws InvalidInput on an empty payload.
Digest canonical_hash(std::span<const std::uint8_t> payload);
Digest canonical_hash(std::string_view payload);

// Incremental hashing for composite keys (manifests, split assignment).
class Hasher {
 public:
  Hasher();
  ~Hasher();
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  Hasher& update(std::string_view data);
  Hasher& update(const Digest& d);
  Hasher& update_u64(std::uint64_t v);
  Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cyclepref::core
