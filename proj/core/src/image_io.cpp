#include "mrsynth/image_io.hpp"

#include <png.h>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mrsynth/error.hpp"

namespace mrsynth {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian host");

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (magic != "Pf" || width <= 0 || height <= 0 || scale == 0.0)
    throw Error(ErrorCode::kCorrupt, "not a grayscale PFM: " + path.string());
  if (scale > 0.0) throw Error(ErrorCode::kCorrupt, "big-endian PFM not supported: " + path.string());
  in.get();  // single whitespace after the scale line

  std::vector<float> rows(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(rows.size() * sizeof(float)))
    throw Error(ErrorCode::kCorrupt, "truncated PFM payload: " + path.string());

  Image img(height, width);
  for (int r = 0; r < height; ++r)
    std::memcpy(&img.at(height - 1 - r, 0), &rows[static_cast<std::size_t>(r) * width],
                static_cast<std::size_t>(width) * sizeof(float));
  return img;
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "Pf\n" << image.cols() << ' ' << image.rows() << "\n-1.0\n";
  for (int r = image.rows() - 1; r >= 0; --r)
    out.write(reinterpret_cast<const char*>(image.data().data() + static_cast<std::size_t>(r) * image.cols()),
              static_cast<std::streamsize>(image.cols() * sizeof(float)));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

namespace {

void append_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void read_from_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->offset, length);
  cur->offset += length;
}

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors by longjmp to png_jmpbuf; the functions below keep
// only trivially destructible locals between setjmp and the libpng calls.
bool write_png_rows(png_structp png, png_infop info, std::vector<std::uint8_t>* out, int width,
                    int height, int color_type, int bit_depth, const std::uint8_t* rows,
                    std::size_t stride) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, out, append_to_vector, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(rows + static_cast<std::size_t>(r) * stride));
  png_write_end(png, nullptr);
  return true;
}

std::vector<std::uint8_t> encode_png(int width, int height, int color_type, int bit_depth,
                                     const std::vector<std::uint8_t>& rows, std::size_t stride) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
  if (!png) throw Error(ErrorCode::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  const bool ok = info != nullptr && write_png_rows(png, info, &out, width, height, color_type,
                                                    bit_depth, rows.data(), stride);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error(ErrorCode::kIo, "PNG encoding failed");
  return out;
}

struct DecodedGray16 {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  bool wrong_format = false;
};

bool read_png_header(png_structp png, png_infop info, ReadCursor* cursor, DecodedGray16* hdr) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, cursor, read_from_vector);
  png_read_info(png, info);
  hdr->width = png_get_image_width(png, info);
  hdr->height = png_get_image_height(png, info);
  hdr->wrong_format =
      png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 16;
  return true;
}

bool read_png_rows(png_structp png, std::uint8_t* rows, std::size_t stride, png_uint_32 height) {
  if (setjmp(png_jmpbuf(png))) return false;
  for (png_uint_32 r = 0; r < height; ++r) png_read_row(png, rows + r * stride, nullptr);
  png_read_end(png, nullptr);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png_gray16(const Image& image) {
  const std::size_t stride = static_cast<std::size_t>(image.cols()) * 2;
  std::vector<std::uint8_t> rows(stride * image.rows());
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c) {
      const double v = std::clamp(static_cast<double>(image.at(r, c)), -1.0, 1.0);
      const auto code = static_cast<std::uint16_t>(std::lround((v + 1.0) * 0.5 * 65535.0));
      rows[r * stride + 2 * c] = static_cast<std::uint8_t>(code >> 8);
      rows[r * stride + 2 * c + 1] = static_cast<std::uint8_t>(code & 0xff);
    }
  return encode_png(image.cols(), image.rows(), PNG_COLOR_TYPE_GRAY, 16, rows, stride);
}

Image decode_png_gray16(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(ErrorCode::kCorrupt, "not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};
  DecodedGray16 hdr;
  std::vector<std::uint8_t> rows;
  bool ok = read_png_header(png, info, &cursor, &hdr) && !hdr.wrong_format;
  if (ok) {
    rows.resize(static_cast<std::size_t>(hdr.width) * 2 * hdr.height);
    ok = read_png_rows(png, rows.data(), static_cast<std::size_t>(hdr.width) * 2, hdr.height);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw Error(ErrorCode::kCorrupt, "expected a valid 16-bit grayscale PNG");

  Image img(static_cast<int>(hdr.height), static_cast<int>(hdr.width));
  const std::size_t stride = static_cast<std::size_t>(hdr.width) * 2;
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      const unsigned code = (static_cast<unsigned>(rows[r * stride + 2 * c]) << 8) |
                            rows[r * stride + 2 * c + 1];
      img.at(r, c) = static_cast<float>(code / 65535.0 * 2.0 - 1.0);
    }
  return img;
}

std::vector<std::uint8_t> encode_png_rgb8(const RgbImage& image) {
  return encode_png(image.cols, image.rows, PNG_COLOR_TYPE_RGB, 8, image.rgb,
                    static_cast<std::size_t>(image.cols) * 3);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::kParse, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kParse, "invalid base64");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

}  // namespace mrsynth
