#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "cyclepref/core/sample.hpp"

namespace cyclepref::core {

// Resolves image locators to bytes. Supported schemes:
//   bitgrid:<bits>   synthetic image, bytes are the bit string itself
//   file://<path>    local file
//   cas:<hex>        object in the content-addressed store (needs a root)
class MediaStore {
 public:
  MediaStore() = default;
  explicit MediaStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::optional<std::filesystem::path>& root() const { return root_; }

  std::string read(std::string_view uri) const;

  // Writes bytes under <root>/objects/<h[0:2]>/<h> and returns "cas:<h>".
  std::string put(std::string_view bytes) const;

  // Reads the bytes behind `uri`, checks them against `expected` when given,
  // and builds the image sample. Throws InvalidInput on a hash mismatch.
  Sample load_image(std::string_view uri, const std::optional<Digest>& expected = std::nullopt) const;

 private:
  std::optional<std::filesystem::path> root_;
};

}  // namespace cyclepref::core
