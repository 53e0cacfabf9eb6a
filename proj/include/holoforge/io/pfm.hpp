#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "holoforge/core/image.hpp"

namespace holoforge::io {

/// Raised for malformed or truncated files; the message carries the byte offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, std::size_t offset, const std::string& what)
      : std::runtime_error(path + ": byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

inline std::uint32_t swap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

// Whitespace-separated header token starting at `pos`.
inline std::string header_token(const std::vector<char>& buf, std::size_t& pos, const std::string& path,
                                const char* what) {
  while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  if (start == pos) throw FormatError(path, start, std::string("missing ") + what);
  return std::string(buf.data() + start, pos - start);
}

inline std::size_t parse_dim(const std::string& tok, std::size_t at, const std::string& path, const char* what) {
  if (tok.empty() || tok.size() > 9 || tok.find_first_not_of("0123456789") != std::string::npos || tok == "0")
    throw FormatError(path, at, std::string("invalid ") + what + " '" + tok + "'");
  return std::stoul(tok);
}

}  // namespace detail

/// Writes "Pf" (one channel) or "PF" (three channels) with scale -1
/// (little-endian) and rows stored bottom-up.
inline void save_pfm(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("save_pfm: expected 1 or 3 channels, got " + img.shape_str());
  if (img.height == 0 || img.width == 0) throw std::invalid_argument("save_pfm: empty image");
  std::string bytes = std::string(img.channels == 1 ? "Pf" : "PF") + "\n" + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n-1\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + img.data.size() * 4);
  char* out = bytes.data() + header;
  for (std::size_t row = 0; row < img.height; ++row) {
    const std::size_t y = img.height - 1 - row;
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(img(c, y, x));
        if constexpr (std::endian::native == std::endian::big) bits = detail::swap32(bits);
        std::memcpy(out, &bits, 4);
        out += 4;
      }
    }
  }
  detail::write_file(path, bytes);
}

/// Reads either byte order; a positive scale means big-endian payload.
inline Image load_pfm(const std::string& path) {
  const auto buf = detail::read_file(path);
  std::size_t pos = 0;
  const std::string magic = detail::header_token(buf, pos, path, "magic");
  if (magic != "Pf" && magic != "PF") throw FormatError(path, 0, "bad magic '" + magic + "' (expected Pf or PF)");
  const std::size_t channels = magic == "Pf" ? 1 : 3;

  std::size_t at = pos;
  const std::string wtok = detail::header_token(buf, pos, path, "width");
  const std::size_t width = detail::parse_dim(wtok, at, path, "width");
  at = pos;
  const std::string htok = detail::header_token(buf, pos, path, "height");
  const std::size_t height = detail::parse_dim(htok, at, path, "height");
  at = pos;
  const std::string stok = detail::header_token(buf, pos, path, "scale");
  double scale = 0;
  try {
    std::size_t used = 0;
    scale = std::stod(stok, &used);
    if (used != stok.size()) throw std::invalid_argument(stok);
  } catch (const std::exception&) {
    throw FormatError(path, at, "invalid scale '" + stok + "'");
  }
  if (scale == 0.0) throw FormatError(path, at, "scale must be nonzero");
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])))
    throw FormatError(path, pos, "missing whitespace after scale");
  ++pos;

  const bool little = scale < 0;
  const std::size_t need = width * height * channels * 4;
  if (buf.size() - pos < need) {
    throw FormatError(path, buf.size(), "truncated payload: expected " + std::to_string(need) + " bytes after offset " +
                                            std::to_string(pos) + ", found " + std::to_string(buf.size() - pos));
  }
  Image img(channels, height, width);
  const char* in = buf.data() + pos;
  const bool swap = little != (std::endian::native == std::endian::little);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t y = height - 1 - row;
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        std::uint32_t bits;
        std::memcpy(&bits, in, 4);
        in += 4;
        if (swap) bits = detail::swap32(bits);
        img(c, y, x) = std::bit_cast<float>(bits);
      }
    }
  }
  return img;
}

}  // namespace holoforge::io
