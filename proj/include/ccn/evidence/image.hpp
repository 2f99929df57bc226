#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ccn {

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct Image {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
    return pixels[(r * width + c) * channels + ch];
  }
};

// Decodes PNG, JPEG or binary/ASCII PNM (P2, P3, P5, P6) by content sniffing.
// Alpha is dropped; 16-bit samples are reduced to 8 bits. Throws DecodeError.
Image decode_image(std::string_view bytes);
Image read_image(const std::filesystem::path& path);

// Encoders used by fixture generation and tests.
std::string encode_pgm(const Image& gray);
std::string encode_ppm(const Image& rgb);
std::string encode_png(const Image& image);

// 8-bit luma, round(0.299 R + 0.587 G + 0.114 B).
Image to_grayscale(const Image& image);

inline constexpr std::string_view kDhashAlgorithm = "dhash-9x8";

/// 64-bit difference hash. Bit (r, c) is stored at position 63 - (8r + c),
/// so the hex form reads row by row.
struct PerceptualHash {
  std::uint64_t bits = 0;
  std::string algorithm = std::string(kDhashAlgorithm);

  std::string to_hex() const;
  // 16 hex digits. Throws FormatError.
  static PerceptualHash from_hex(std::string_view hex);

  friend bool operator==(const PerceptualHash&, const PerceptualHash&) = default;
};

// Grayscale, bilinear resize to 9 x 8 (pixel-center aligned), then bit
// (r, c) = 1 iff pixel[r, c] > pixel[r, c + 1]. Throws DecodeError on an
// empty image.
PerceptualHash perceptual_hash(const Image& image);
PerceptualHash perceptual_hash(std::string_view encoded);

// Throws ValidationError when the algorithms differ.
int hamming_distance(const PerceptualHash& a, const PerceptualHash& b);
bool hash_match(const PerceptualHash& a, const PerceptualHash& b, int threshold = 8);

}  // namespace ccn
