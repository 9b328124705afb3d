/* Copyright 2026 The layerforge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layerforge/error.hpp"
#include "layerforge/geometry.hpp"

namespace layerforge {

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 0;
  friend constexpr bool operator==(const Rgba&, const Rgba&) = default;
};

// Owned 8-bit RGBA raster, row-major, straight (non-premultiplied) alpha.
class RgbaImage {
 public:
  RgbaImage() = default;
  RgbaImage(int width, int height, Rgba fill = {}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("RgbaImage: negative dimensions");
    data_.resize(static_cast<std::size_t>(width) * height * 4);
    for (std::size_t i = 0; i < data_.size(); i += 4) {
      data_[i] = fill.r;
      data_[i + 1] = fill.g;
      data_[i + 2] = fill.b;
      data_[i + 3] = fill.a;
    }
  }
  RgbaImage(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height * 4)
      throw Error("RgbaImage: buffer size does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  CanvasSize size() const { return {width_, height_}; }

  std::uint8_t* px(int x, int y) { return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 4; }
  const std::uint8_t* px(int x, int y) const {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 4;
  }
  Rgba at(int x, int y) const {
    const auto* p = px(x, y);
    return {p[0], p[1], p[2], p[3]};
  }
  void set(int x, int y, Rgba c) {
    auto* p = px(x, y);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
    p[3] = c.a;
  }

  std::span<std::uint8_t> bytes() { return data_; }
  std::span<const std::uint8_t> bytes() const { return data_; }

  friend bool operator==(const RgbaImage&, const RgbaImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int width, int height) : width_(width), height_(height) {
    bits_.assign(static_cast<std::size_t>(width) * height, 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Source-over on one pixel, evaluated in exact integer arithmetic with
// round-half-up. With alphas scaled to bytes the blend is
//   D     = af*255 + ab*(255-af)
//   out_a = round(D / 255)
//   out_c = round((cf*af*255 + cb*ab*(255-af)) / D)
// A fully transparent source leaves the destination pixel untouched, which
// is also what the formula gives whenever ab > 0.
inline void blend_pixel(std::uint8_t* dst, const std::uint8_t* src) {
  const std::uint32_t af = src[3];
  if (af == 0) return;
  const std::uint32_t ab = dst[3];
  if (af == 255) {
    dst[0] = src[0];
    dst[1] = src[1];
    dst[2] = src[2];
    dst[3] = 255;
    return;
  }
  const std::uint32_t wf = af * 255;
  const std::uint32_t wb = ab * (255 - af);
  const std::uint32_t d = wf + wb;
  for (int c = 0; c < 3; ++c) {
    const std::uint32_t num = src[c] * wf + dst[c] * wb;
    dst[c] = static_cast<std::uint8_t>((2 * num + d) / (2 * d));
  }
  dst[3] = static_cast<std::uint8_t>((d + 127) / 255);
}

// Draws `above` onto `below` with its top-left corner at `offset`; pixels
// falling outside `below` are clipped.
inline void composite_over_inplace(RgbaImage& below, const RgbaImage& above, Position offset) {
  const int x_begin = std::max(0, offset.x);
  const int y_begin = std::max(0, offset.y);
  const int x_end = std::min(below.width(), offset.x + above.width());
  const int y_end = std::min(below.height(), offset.y + above.height());
  for (int y = y_begin; y < y_end; ++y) {
    auto* d = below.px(x_begin, y);
    const auto* s = above.px(x_begin - offset.x, y - offset.y);
    for (int x = x_begin; x < x_end; ++x, d += 4, s += 4) blend_pixel(d, s);
  }
}

inline RgbaImage composite_over(const RgbaImage& below, const RgbaImage& above, Position offset = {}) {
  RgbaImage out = below;
  composite_over_inplace(out, above, offset);
  return out;
}

inline constexpr std::uint8_t kDefaultAlphaThreshold = 0;

inline PixelMask alpha_mask(const RgbaImage& img, std::uint8_t threshold = kDefaultAlphaThreshold) {
  PixelMask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.set(x, y, img.px(x, y)[3] > threshold);
  return m;
}

inline std::optional<BBox> tighten_bbox_to_alpha(const RgbaImage& img,
                                                 std::uint8_t threshold = kDefaultAlphaThreshold) {
  int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < img.height(); ++y) {
    const auto* p = img.px(0, y);
    for (int x = 0; x < img.width(); ++x, p += 4) {
      if (p[3] > threshold) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return std::nullopt;
  return BBox{x0, y0, x1 + 1, y1 + 1};
}

inline RgbaImage crop(const RgbaImage& img, const BBox& b) {
  if (!b.valid() || !box_within(b, img.size())) throw Error("crop: box outside image");
  RgbaImage out(b.width(), b.height());
  for (int y = 0; y < b.height(); ++y) {
    const auto* s = img.px(b.x0, b.y0 + y);
    std::copy(s, s + static_cast<std::size_t>(b.width()) * 4, out.px(0, y));
  }
  return out;
}

// Bilinear resampling with pixel-center alignment. Interpolation runs on
// premultiplied values so transparent pixels do not bleed color.
inline RgbaImage resize_bilinear(const RgbaImage& src, int width, int height) {
  if (src.empty()) throw Error("resize_bilinear: empty source");
  if (width <= 0 || height <= 0) throw Error("resize_bilinear: degenerate target size");
  if (width == src.width() && height == src.height()) return src;
  RgbaImage out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      const std::array<const std::uint8_t*, 4> taps = {src.px(x0, y0), src.px(x1, y0),
                                                      src.px(x0, y1), src.px(x1, y1)};
      const std::array<double, 4> w = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
      double acc[4] = {0, 0, 0, 0};
      for (int t = 0; t < 4; ++t) {
        const double a = taps[t][3];
        acc[0] += w[t] * taps[t][0] * a;
        acc[1] += w[t] * taps[t][1] * a;
        acc[2] += w[t] * taps[t][2] * a;
        acc[3] += w[t] * a;
      }
      auto* d = out.px(x, y);
      if (acc[3] <= 0.0) {
        d[0] = d[1] = d[2] = d[3] = 0;
        continue;
      }
      for (int c = 0; c < 3; ++c)
        d[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c] / acc[3]), 0L, 255L));
      d[3] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[3]), 0L, 255L));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction metrics
// ---------------------------------------------------------------------------

// Returned by psnr() when the inputs are identical.
inline constexpr double kPsnrCapDb = 99.0;

inline void require_same_size(const RgbaImage& a, const RgbaImage& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                std::to_string(b.height()) + ")");
}

inline double psnr(const RgbaImage& a, const RgbaImage& b, int channels) {
  require_same_size(a, b, "psnr");
  if (channels != 3 && channels != 4) throw Error("psnr: channels must be 3 or 4");
  if (a.empty()) throw Error("psnr: empty image");
  const auto pa = a.bytes();
  const auto pb = b.bytes();
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < pa.size(); i += 4)
    for (int c = 0; c < channels; ++c) {
      const int d = static_cast<int>(pa[i + c]) - static_cast<int>(pb[i + c]);
      sse += static_cast<std::uint64_t>(d * d);
    }
  if (sse == 0) return kPsnrCapDb;
  const double mse = static_cast<double>(sse) / (static_cast<double>(pa.size() / 4) * channels);
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double mid = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - mid) * (i - mid) / (sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable "valid" filtering: output is (w - k + 1) x (h - k + 1).
inline std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                        const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += taps[t] * in[static_cast<std::size_t>(y) * w + x + t];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += taps[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

// Mean SSIM over all full-window positions (Gaussian-weighted window),
// computed per channel and averaged over the first `channels` channels.
inline double ssim(const RgbaImage& a, const RgbaImage& b, int channels = 4,
                   const SsimParams& params = {}) {
  require_same_size(a, b, "ssim");
  if (channels < 1 || channels > 4) throw Error("ssim: channels must be in [1, 4]");
  if (a.width() < params.window || a.height() < params.window)
    throw Error("ssim: image smaller than the " + std::to_string(params.window) + "px window");
  const int w = a.width(), h = a.height();
  const auto taps = detail::gaussian_taps(params.window, params.sigma);
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < channels; ++c) {
    const auto pa = a.bytes();
    const auto pb = b.bytes();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pa[i * 4 + c];
      y[i] = pb[i * 4 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h, taps);
    const auto my = detail::filter_valid(y, w, h, taps);
    const auto mxx = detail::filter_valid(xx, w, h, taps);
    const auto myy = detail::filter_valid(yy, w, h, taps);
    const auto mxy = detail::filter_valid(xy, w, h, taps);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / channels;
}

}  // namespace layerforge
