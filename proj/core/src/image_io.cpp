#include "tcdc/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace tcdc {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_size(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
    fail(ErrorCode::IoError, "malformed header in " + path.string());
  }
  return std::stoul(tok);
}

}  // namespace

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  const std::string magic = next_token(is);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    fail(ErrorCode::UnsupportedPixelFormat, "'" + magic + "' in " + path.string() + " (only P5/P6)");
  }
  const std::size_t w = parse_size(next_token(is), path);
  const std::size_t h = parse_size(next_token(is), path);
  const std::size_t maxval = parse_size(next_token(is), path);
  if (maxval == 0 || maxval > 255) {
    fail(ErrorCode::UnsupportedPixelFormat, "maxval " + std::to_string(maxval) + " in " + path.string());
  }
  if (w == 0 || h == 0) fail(ErrorCode::IoError, "zero image extent in " + path.string());

  std::vector<unsigned char> raw(w * h * channels);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) fail(ErrorCode::IoError, "short pixel data in " + path.string());

  Tensor out({channels, h, w});
  const float scale = static_cast<float>(maxval);
  const std::size_t plane = h * w;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < channels; ++c) out[c * plane + i] = static_cast<float>(raw[i * channels + c]) / scale;
  return out;
}

void write_pnm(const Tensor& image, const std::filesystem::path& path) {
  std::size_t channels = 1, h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3)) {
    channels = image.dim(0);
    h = image.dim(1);
    w = image.dim(2);
  } else {
    fail(ErrorCode::ShapeMismatch, "write_pnm expects [H,W], [1,H,W] or [3,H,W]");
  }
  const std::size_t plane = h * w;
  std::vector<unsigned char> raw(plane * channels);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = std::clamp(image[c * plane + i], 0.0f, 1.0f);
      raw[i * channels + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << (channels == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) fail(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace tcdc
