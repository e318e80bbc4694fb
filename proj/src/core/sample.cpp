#include "cyclepref/core/sample.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::core {

std::string_view to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::image;
  if (s == "text") return Modality::text;
  throw InvalidInput("unknown modality '" + std::string(s) + "'");
}

Modality opposite(Modality m) { return m == Modality::image ? Modality::text : Modality::image; }

std::string_view to_string(Direction d) { return d == Direction::i2t ? "i2t" : "t2i"; }

Direction parse_direction(std::string_view s) {
  if (s == "i2t") return Direction::i2t;
  if (s == "t2i") return Direction::t2i;
  throw InvalidInput("unknown direction '" + std::string(s) + "'");
}

Direction opposite(Direction d) { return d == Direction::i2t ? Direction::t2i : Direction::i2t; }

Modality condition_modality(Direction d) { return d == Direction::i2t ? Modality::image : Modality::text; }
Modality candidate_modality(Direction d) { return d == Direction::i2t ? Modality::text : Modality::image; }

std::string nfc_normalize(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(utf8.size());
  for (int32_t i = 0; i < length;) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) throw InvalidInput("text is not valid UTF-8");
  }
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), length));
  if (nfc->isNormalized(in, status) && U_SUCCESS(status)) return std::string(utf8);
  status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc->normalize(in, status);
  if (U_FAILURE(status)) throw InvalidInput("NFC normalization failed");
  std::string result;
  out.toUTF8String(result);
  return result;
}

Sample::Sample(Modality m, std::shared_ptr<const std::string> payload, std::string uri)
    : modality_(m), payload_(std::move(payload)), uri_(std::move(uri)), hash_(canonical_hash(*payload_)) {}

Sample Sample::text(std::string_view utf8) {
  if (utf8.empty()) throw InvalidInput("text sample must be a non-empty string");
  return Sample(Modality::text, std::make_shared<const std::string>(nfc_normalize(utf8)), "");
}

Sample Sample::image(std::string bytes, std::string uri) {
  if (bytes.empty()) throw InvalidInput("image sample has no bytes");
  if (uri.empty()) throw InvalidInput("image sample needs a media locator");
  return Sample(Modality::image, std::make_shared<const std::string>(std::move(bytes)), std::move(uri));
}

const std::string& Sample::text_value() const {
  if (modality_ != Modality::text) throw InvalidInput("sample is an image, not text");
  return *payload_;
}

}  // namespace cyclepref::core
