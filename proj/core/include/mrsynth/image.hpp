#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mrsynth {

/// Row-major single-channel float image.
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, float fill = 0.0f);
  Image(int rows, int cols, std::vector<float> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  float at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  float min() const;
  float max() const;
  double mean() const;

  bool operator==(const Image&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<float> data_;
};

/// Bilinear resampling with the corner-aligned convention: output pixel i
/// samples source coordinate i * (src - 1) / (dst - 1), so the four corner
/// pixels are carried over unchanged. Output values are convex combinations
/// of input values.
Image resize_bilinear(const Image& src, int rows, int cols);

/// 2x2 mean pooling; both sides must be even.
Image box_downsample2(const Image& src);

/// Per-image min-max map to [-1, 1]. Throws Error(kDegenerateInput) when
/// max == min.
Image normalize_symmetric(const Image& src);

/// 8-bit RGB raster used for annotated montages.
struct RgbImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(int r, int c) : rows(r), cols(c), rgb(static_cast<std::size_t>(r) * c * 3, 0) {}
  void set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue);
};

/// Grayscale [-1, 1] image to 8-bit RGB.
RgbImage to_rgb(const Image& gray);

/// Blit `tile` into `canvas` with its top-left corner at (row, col).
void paste(RgbImage& canvas, const RgbImage& tile, int row, int col);

/// Renders `text` with a built-in 3x5 pixel font (digits, '.', '-', '/',
/// ':', space and the letters T R E C S A). Unknown glyphs render blank.
void draw_text(RgbImage& canvas, int row, int col, const std::string& text, std::uint8_t red,
               std::uint8_t green, std::uint8_t blue, int scale = 1);

}  // namespace mrsynth
