#include "cyclepref/core/media.hpp"

#include <fstream>
#include <sstream>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::core {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot read media file '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string MediaStore::read(std::string_view uri) const {
  if (uri.starts_with("bitgrid:")) {
    auto bits = uri.substr(8);
    if (bits.empty() || bits.find_first_not_of("01") != std::string_view::npos) {
      throw InvalidInput("malformed bitgrid locator '" + std::string(uri) + "'");
    }
    return std::string(bits);
  }
  if (uri.starts_with("file://")) return slurp(fs::path(std::string(uri.substr(7))));
  if (uri.starts_with("cas:")) {
    if (!root_) throw InvalidInput("cas locator '" + std::string(uri) + "' needs a media store root");
    auto hex = std::string(uri.substr(4));
    if (hex.size() < 2) throw InvalidInput("malformed cas locator");
    return slurp(*root_ / "objects" / hex.substr(0, 2) / hex);
  }
  throw InvalidInput("unsupported media locator '" + std::string(uri) + "'");
}

std::string MediaStore::put(std::string_view bytes) const {
  if (!root_) throw InvalidInput("media store has no root directory");
  auto hex = canonical_hash(bytes).hex();
  auto dir = *root_ / "objects" / hex.substr(0, 2);
  fs::create_directories(dir);
  auto path = dir / hex;
  if (!fs::exists(path)) {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error("failed writing media object '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
  }
  return "cas:" + hex;
}

Sample MediaStore::load_image(std::string_view uri, const std::optional<Digest>& expected) const {
  auto sample = Sample::image(read(uri), std::string(uri));
  if (expected && sample.content_hash() != *expected) {
    throw InvalidInput("media at '" + std::string(uri) + "' hashes to " + sample.content_hash().hex() + ", expected " +
                       expected->hex());
  }
  return sample;
}

}  // namespace cyclepref::core
