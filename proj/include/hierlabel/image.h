// Copyright 2026 The hierlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HIERLABEL_IMAGE_H_
#define HIERLABEL_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hierlabel {

// 8-bit RGB, row-major, interleaved.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;

  bool operator==(const Image&) const = default;
};

// 8-bit single channel, row-major.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const GrayImage&) const = default;
};

// Binary PPM (P6, maxval 255) and PGM (P5, maxval 255).
std::string encode_ppm(const Image& image);
std::string encode_pgm(const GrayImage& image);
// Throw kCorruptFile with `context` prefixed on malformed headers or data.
Image decode_ppm(std::string_view bytes, std::string_view context);
GrayImage decode_pgm(std::string_view bytes, std::string_view context);

Image read_ppm(const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

// Planar CHW doubles in [-0.5, 0.5]: value / 255 - 0.5.
std::vector<double> image_to_input(const Image& image);

}  // namespace hierlabel

#endif  // HIERLABEL_IMAGE_H_
