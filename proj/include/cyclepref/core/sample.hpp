#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "cyclepref/core/hash.hpp"

namespace cyclepref::core {

enum class Modality { image, text };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);
Modality opposite(Modality m);

// i2t: condition is an image, candidates are texts. t2i is the reverse.
enum class Direction { i2t, t2i };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);
Direction opposite(Direction d);
Modality condition_modality(Direction d);
Modality candidate_modality(Direction d);

// Unicode NFC normalization of UTF-8 text. Throws InvalidInput on malformed UTF-8.
std::string nfc_normalize(std::string_view utf8);

// Modality-tagged datum. Text is carried inline (NFC-normalized); images carry
// their raw encoded bytes plus a media locator. Immutable once built.
class Sample {
 public:
  static Sample text(std::string_view utf8);
  static Sample image(std::string bytes, std::string uri);

  Modality modality() const { return modality_; }
  bool is_text() const { return modality_ == Modality::text; }
  bool is_image() const { return modality_ == Modality::image; }

  // Canonical payload bytes: NFC text, or raw image bytes.
  const std::string& payload() const { return *payload_; }
  // Throws InvalidInput when called on an image.
  const std::string& text_value() const;
  // Empty for text samples.
  const std::string& uri() const { return uri_; }
  const Digest& content_hash() const { return hash_; }

  friend bool operator==(const Sample& a, const Sample& b) {
    return a.modality_ == b.modality_ && a.hash_ == b.hash_ && a.uri_ == b.uri_;
  }

 private:
  Sample(Modality m, std::shared_ptr<const std::string> payload, std::string uri);

  Modality modality_;
  std::shared_ptr<const std::string> payload_;
  std::string uri_;
  Digest hash_;
};

}  // namespace cyclepref::core
