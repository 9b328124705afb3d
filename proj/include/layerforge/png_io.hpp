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

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "layerforge/error.hpp"
#include "layerforge/image.hpp"

namespace layerforge {

namespace detail {
struct PngImageGuard {
  png_image img;
  PngImageGuard() {
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImageGuard() { png_image_free(&img); }
  PngImageGuard(const PngImageGuard&) = delete;
  PngImageGuard& operator=(const PngImageGuard&) = delete;
};

inline RgbaImage finish_read(PngImageGuard& g, const std::string& what) {
  g.img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(g.img));
  if (!png_image_finish_read(&g.img, nullptr, buf.data(), 0, nullptr))
    throw IoError("png decode failed for " + what + ": " + g.img.message);
  return RgbaImage(static_cast<int>(g.img.width), static_cast<int>(g.img.height), std::move(buf));
}
}  // namespace detail

// Any PNG color type is converted to 8-bit straight RGBA.
inline RgbaImage read_png(const std::filesystem::path& path) {
  detail::PngImageGuard g;
  if (!png_image_begin_read_from_file(&g.img, path.c_str()))
    throw IoError("cannot read png " + path.string() + ": " + g.img.message);
  return detail::finish_read(g, path.string());
}

inline RgbaImage decode_png(const std::vector<std::uint8_t>& bytes) {
  detail::PngImageGuard g;
  if (!png_image_begin_read_from_memory(&g.img, bytes.data(), bytes.size()))
    throw IoError(std::string("cannot decode png from memory: ") + g.img.message);
  return detail::finish_read(g, "memory buffer");
}

inline std::vector<std::uint8_t> encode_png(const RgbaImage& image) {
  if (image.empty()) throw IoError("encode_png: empty image");
  detail::PngImageGuard g;
  g.img.width = static_cast<png_uint_32>(image.width());
  g.img.height = static_cast<png_uint_32>(image.height());
  g.img.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(g.img, size, 0, image.bytes().data(), 0, nullptr))
    throw IoError(std::string("png encode failed: ") + g.img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&g.img, out.data(), &size, 0, image.bytes().data(), 0, nullptr))
    throw IoError(std::string("png encode failed: ") + g.img.message);
  out.resize(size);
  return out;
}

inline void write_png(const std::filesystem::path& path, const RgbaImage& image) {
  if (image.empty()) throw IoError("write_png: empty image for " + path.string());
  detail::PngImageGuard g;
  g.img.width = static_cast<png_uint_32>(image.width());
  g.img.height = static_cast<png_uint_32>(image.height());
  g.img.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&g.img, path.c_str(), 0, image.bytes().data(), 0, nullptr))
    throw IoError("cannot write png " + path.string() + ": " + g.img.message);
}

}  // namespace layerforge
