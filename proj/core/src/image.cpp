#include "mrsynth/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mrsynth/error.hpp"

namespace mrsynth {

Image::Image(int rows, int cols, float fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw Error(ErrorCode::kShape, "negative image extent");
}

Image::Image(int rows, int cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0 || data_.size() != static_cast<std::size_t>(rows) * cols)
    throw Error(ErrorCode::kShape, "pixel count does not match image extent");
}

float Image::min() const { return data_.empty() ? 0.0f : *std::min_element(data_.begin(), data_.end()); }
float Image::max() const { return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end()); }

double Image::mean() const {
  if (data_.empty()) return 0.0;
  return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

Image resize_bilinear(const Image& src, int rows, int cols) {
  if (src.empty() || rows <= 0 || cols <= 0) throw Error(ErrorCode::kShape, "empty resize");
  if (rows == src.rows() && cols == src.cols()) return src;

  auto coord = [](int i, int dst, int from) {
    return dst == 1 ? 0.0 : static_cast<double>(i) * (from - 1) / (dst - 1);
  };
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const double y = coord(r, rows, src.rows());
    const int y0 = std::min(static_cast<int>(std::floor(y)), src.rows() - 1);
    const int y1 = std::min(y0 + 1, src.rows() - 1);
    const double wy = y - y0;
    for (int c = 0; c < cols; ++c) {
      const double x = coord(c, cols, src.cols());
      const int x0 = std::min(static_cast<int>(std::floor(x)), src.cols() - 1);
      const int x1 = std::min(x0 + 1, src.cols() - 1);
      const double wx = x - x0;
      const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
      const double bottom = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
      out.at(r, c) = static_cast<float>((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

Image box_downsample2(const Image& src) {
  if (src.rows() % 2 != 0 || src.cols() % 2 != 0)
    throw Error(ErrorCode::kShape, "box downsampling needs even sides");
  Image out(src.rows() / 2, src.cols() / 2);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c)
      out.at(r, c) = 0.25f * (src.at(2 * r, 2 * c) + src.at(2 * r, 2 * c + 1) +
                              src.at(2 * r + 1, 2 * c) + src.at(2 * r + 1, 2 * c + 1));
  return out;
}

Image normalize_symmetric(const Image& src) {
  if (src.empty()) throw Error(ErrorCode::kDegenerateInput, "empty image");
  const double lo = src.min();
  const double hi = src.max();
  if (!(hi > lo)) throw Error(ErrorCode::kDegenerateInput, "image has zero dynamic range");
  Image out(src.rows(), src.cols());
  auto in = src.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == lo) {
      dst[i] = -1.0f;
    } else if (in[i] == hi) {
      dst[i] = 1.0f;
    } else {
      dst[i] = static_cast<float>(std::clamp(2.0 * (in[i] - lo) / (hi - lo) - 1.0, -1.0, 1.0));
    }
  }
  return out;
}

void RgbImage::set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
  if (r < 0 || c < 0 || r >= rows || c >= cols) return;
  auto* p = &rgb[(static_cast<std::size_t>(r) * cols + c) * 3];
  p[0] = red;
  p[1] = green;
  p[2] = blue;
}

RgbImage to_rgb(const Image& gray) {
  RgbImage out(gray.rows(), gray.cols());
  for (int r = 0; r < gray.rows(); ++r)
    for (int c = 0; c < gray.cols(); ++c) {
      const double v = std::clamp((gray.at(r, c) + 1.0) * 0.5, 0.0, 1.0);
      const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0));
      out.set(r, c, g, g, g);
    }
  return out;
}

void paste(RgbImage& canvas, const RgbImage& tile, int row, int col) {
  for (int r = 0; r < tile.rows; ++r)
    for (int c = 0; c < tile.cols; ++c) {
      const auto* p = &tile.rgb[(static_cast<std::size_t>(r) * tile.cols + c) * 3];
      canvas.set(row + r, col + c, p[0], p[1], p[2]);
    }
}

namespace {

// 3x5 glyphs, one 3-bit row mask per line, MSB = left column.
std::array<std::uint8_t, 5> glyph(char ch) {
  switch (ch) {
    case '0': return {7, 5, 5, 5, 7};
    case '1': return {2, 6, 2, 2, 7};
    case '2': return {7, 1, 7, 4, 7};
    case '3': return {7, 1, 7, 1, 7};
    case '4': return {5, 5, 7, 1, 1};
    case '5': return {7, 4, 7, 1, 7};
    case '6': return {7, 4, 7, 5, 7};
    case '7': return {7, 1, 1, 1, 1};
    case '8': return {7, 5, 7, 5, 7};
    case '9': return {7, 5, 7, 1, 7};
    case '.': return {0, 0, 0, 0, 2};
    case '-': return {0, 0, 7, 0, 0};
    case '/': return {1, 1, 2, 4, 4};
    case ':': return {0, 2, 0, 2, 0};
    case 'T': return {7, 2, 2, 2, 2};
    case 'R': return {6, 5, 6, 5, 5};
    case 'E': return {7, 4, 6, 4, 7};
    case 'C': return {7, 4, 4, 4, 7};
    case 'S': return {7, 4, 7, 1, 7};
    case 'A': return {2, 5, 7, 5, 5};
    default: return {0, 0, 0, 0, 0};
  }
}

}  // namespace

void draw_text(RgbImage& canvas, int row, int col, const std::string& text, std::uint8_t red,
               std::uint8_t green, std::uint8_t blue, int scale) {
  int x = col;
  for (char ch : text) {
    const auto g = glyph(ch);
    for (int gy = 0; gy < 5; ++gy)
      for (int gx = 0; gx < 3; ++gx)
        if (g[gy] & (4 >> gx))
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx)
              canvas.set(row + gy * scale + sy, x + gx * scale + sx, red, green, blue);
    x += 4 * scale;
  }
}

}  // namespace mrsynth
