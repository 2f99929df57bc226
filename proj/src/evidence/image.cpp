#include "ccn/evidence/image.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <jpeglib.h>
#include <png.h>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// --- PNG ----------------------------------------------------------------------

Image decode_png(std::string_view bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("png: ") + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image out;
  out.width = img.width;
  out.height = img.height;
  out.channels = gray ? 1 : 3;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  // Transparent pixels are composited over black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&img, &background, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DecodeError("png: " + msg);
  }
  return out;
}

// --- JPEG ---------------------------------------------------------------------

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Image decode_jpeg(std::string_view bytes) {
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_fail;
  err.mgr.output_message = [](j_common_ptr) {};
  Image out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError(std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.channels = static_cast<std::size_t>(cinfo.output_components);
  out.pixels.resize(out.width * out.height * out.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + cinfo.output_scanline * out.width * out.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

// --- PNM ----------------------------------------------------------------------

class PnmReader {
 public:
  explicit PnmReader(std::string_view b) : b_(b) {}

  std::size_t number() {
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_++] - '0');
      if (++digits > 9) throw DecodeError("pnm: number too large");
    }
    if (digits == 0) throw DecodeError("pnm: expected a number");
    return v;
  }

  std::uint8_t byte() {
    if (pos_ >= b_.size()) throw DecodeError("pnm: truncated pixel data");
    return static_cast<std::uint8_t>(b_[pos_++]);
  }

  // Exactly one whitespace byte separates the header from binary data.
  void end_header() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw DecodeError("pnm: malformed header");
    }
    ++pos_;
  }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view b_;
  std::size_t pos_ = 2;
};

Image decode_pnm(std::string_view bytes) {
  const char kind = bytes[1];
  PnmReader r(bytes);
  Image out;
  out.width = r.number();
  out.height = r.number();
  const std::size_t maxval = r.number();
  if (out.width == 0 || out.height == 0) throw DecodeError("pnm: empty image");
  if (maxval == 0 || maxval > 65535) throw DecodeError("pnm: bad maximum value");
  out.channels = kind == '2' || kind == '5' ? 1 : 3;
  const std::size_t n = out.width * out.height * out.channels;
  if (n / out.width / out.height != out.channels || n > (std::size_t{1} << 32)) throw DecodeError("pnm: image too large");
  out.pixels.resize(n);
  auto scale = [&](std::size_t v) {
    if (v > maxval) throw DecodeError("pnm: sample exceeds maximum value");
    return static_cast<std::uint8_t>(std::lround(static_cast<double>(v) * 255.0 / static_cast<double>(maxval)));
  };
  const bool ascii = kind == '2' || kind == '3';
  if (!ascii) r.end_header();
  for (auto& px : out.pixels) {
    if (ascii) {
      px = scale(r.number());
    } else if (maxval < 256) {
      px = scale(r.byte());
    } else {
      const std::size_t hi = r.byte();
      px = scale(hi << 8 | r.byte());
    }
  }
  return out;
}

// Written as v0 + f * (v1 - v0) so equal neighbours interpolate exactly.
double lerp(double v0, double v1, double f) { return v0 + f * (v1 - v0); }

double sample(const Image& gray, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(gray.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(gray.width - 1));
  const auto y0 = static_cast<std::size_t>(y), x0 = static_cast<std::size_t>(x);
  const std::size_t y1 = std::min(y0 + 1, gray.height - 1), x1 = std::min(x0 + 1, gray.width - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  const double top = lerp(gray.at(y0, x0), gray.at(y0, x1), fx);
  const double bottom = lerp(gray.at(y1, x0), gray.at(y1, x1), fx);
  return lerp(top, bottom, fy);
}

void write_png_bytes(png_structp png, png_bytep data, png_size_t length) {
  static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), length);
}

}  // namespace

Image decode_image(std::string_view bytes) {
  if (starts_with(bytes, "\x89PNG\r\n\x1a\n")) return decode_png(bytes);
  if (starts_with(bytes, "\xff\xd8\xff")) return decode_jpeg(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes);
  }
  throw DecodeError("unrecognized image format");
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_image(ss.str());
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const Image& gray) {
  if (gray.channels != 1) throw ValidationError("encode_pgm needs a grayscale image");
  std::string out = "P5\n" + std::to_string(gray.width) + " " + std::to_string(gray.height) + "\n255\n";
  out.append(gray.pixels.begin(), gray.pixels.end());
  return out;
}

std::string encode_ppm(const Image& rgb) {
  if (rgb.channels != 3) throw ValidationError("encode_ppm needs an RGB image");
  std::string out = "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
  out.append(rgb.pixels.begin(), rgb.pixels.end());
  return out;
}

std::string encode_png(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ValidationError("encode_png needs 1 or 3 channels");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DecodeError("png: cannot create writer");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DecodeError("png: encoding failed");
  }
  png_set_write_fn(png, &out, write_png_bytes, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < image.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * image.width * image.channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image to_grayscale(const Image& image) {
  if (image.channels == 1) return image;
  if (image.channels != 3) throw ValidationError("expected 1 or 3 channels");
  Image g{image.width, image.height, 1, std::vector<std::uint8_t>(image.width * image.height)};
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const double y = 0.299 * image.pixels[3 * i] + 0.587 * image.pixels[3 * i + 1] + 0.114 * image.pixels[3 * i + 2];
    g.pixels[i] = static_cast<std::uint8_t>(std::min(255.0, std::round(y)));
  }
  return g;
}

std::string PerceptualHash::to_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

PerceptualHash PerceptualHash::from_hex(std::string_view hex) {
  if (hex.size() != 16) throw FormatError("perceptual hash must be 16 hex digits: '" + std::string(hex) + "'");
  PerceptualHash h;
  for (char c : hex) {
    const int v = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                  : (c >= 'a' && c <= 'f')                    ? c - 'a' + 10
                  : (c >= 'A' && c <= 'F')                    ? c - 'A' + 10
                                                              : -1;
    if (v < 0) throw FormatError("perceptual hash must be 16 hex digits: '" + std::string(hex) + "'");
    h.bits = h.bits << 4 | static_cast<std::uint64_t>(v);
  }
  return h;
}

PerceptualHash perceptual_hash(const Image& image) {
  if (image.width == 0 || image.height == 0 || image.pixels.empty()) throw DecodeError("cannot hash an empty image");
  const Image gray = to_grayscale(image);
  constexpr std::size_t W = 9, H = 8;
  double px[H][W];
  const double sy = static_cast<double>(gray.height) / H, sx = static_cast<double>(gray.width) / W;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) px[r][c] = sample(gray, (r + 0.5) * sy - 0.5, (c + 0.5) * sx - 0.5);
  PerceptualHash h;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c + 1 < W; ++c)
      if (px[r][c] > px[r][c + 1]) h.bits |= std::uint64_t{1} << (63 - (8 * r + c));
  return h;
}

PerceptualHash perceptual_hash(std::string_view encoded) { return perceptual_hash(decode_image(encoded)); }

int hamming_distance(const PerceptualHash& a, const PerceptualHash& b) {
  if (a.algorithm != b.algorithm) {
    throw ValidationError("cannot compare hashes of different algorithms: " + a.algorithm + " vs " + b.algorithm);
  }
  return std::popcount(a.bits ^ b.bits);
}

bool hash_match(const PerceptualHash& a, const PerceptualHash& b, int threshold) {
  return hamming_distance(a, b) <= threshold;
}

}  // namespace ccn
