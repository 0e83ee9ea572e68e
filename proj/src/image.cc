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

#include "hierlabel/image.h"

#include <cctype>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"

namespace hierlabel {
namespace {

std::string header(std::string_view magic, std::size_t width,
                   std::size_t height) {
  return std::string(magic) + "\n" + std::to_string(width) + " " +
         std::to_string(height) + "\n255\n";
}

struct Netpbm {
  std::size_t width = 0;
  std::size_t height = 0;
  std::string_view data;
};

Netpbm decode_netpbm(std::string_view bytes, std::string_view magic,
                     std::size_t channels, std::string_view context) {
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::kCorruptFile, std::string(context) + ": " + why);
  };
  if (bytes.substr(0, 2) != magic) {
    bad("bad image header (expected " + std::string(magic) + ")");
  }
  std::size_t pos = 2;
  std::size_t fields[3] = {0, 0, 0};
  for (std::size_t& field : fields) {
    // Whitespace and '#' comments may separate header fields.
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    if (pos == start || pos - start > 9) bad("bad image header");
    field = static_cast<std::size_t>(
        std::stoul(std::string(bytes.substr(start, pos - start))));
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    bad("bad image header");
  }
  ++pos;
  if (fields[2] != 255) bad("unsupported maxval " + std::to_string(fields[2]));
  if (fields[0] == 0 || fields[1] == 0) bad("image has zero size");
  Netpbm out;
  out.width = fields[0];
  out.height = fields[1];
  const std::size_t expected = out.width * out.height * channels;
  if (bytes.size() - pos != expected) {
    bad("image data has " + std::to_string(bytes.size() - pos) +
        " bytes, expected " + std::to_string(expected));
  }
  out.data = bytes.substr(pos);
  return out;
}

}  // namespace

std::string encode_ppm(const Image& image) {
  std::string out = header("P6", image.width, image.height);
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = header("P5", image.width, image.height);
  out.append(reinterpret_cast<const char*>(image.pixels.data()),
             image.pixels.size());
  return out;
}

Image decode_ppm(std::string_view bytes, std::string_view context) {
  const Netpbm n = decode_netpbm(bytes, "P6", 3, context);
  Image image;
  image.width = n.width;
  image.height = n.height;
  image.rgb.assign(n.data.begin(), n.data.end());
  return image;
}

GrayImage decode_pgm(std::string_view bytes, std::string_view context) {
  const Netpbm n = decode_netpbm(bytes, "P5", 1, context);
  GrayImage image;
  image.width = n.width;
  image.height = n.height;
  image.pixels.assign(n.data.begin(), n.data.end());
  return image;
}

Image read_ppm(const std::filesystem::path& path) {
  return decode_ppm(read_file(path), path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  return decode_pgm(read_file(path), path.string());
}

std::vector<double> image_to_input(const Image& image) {
  const std::size_t plane = image.height * image.width;
  std::vector<double> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out[c * plane + i] = image.rgb[3 * i + c] / 255.0 - 0.5;
    }
  }
  return out;
}

}  // namespace hierlabel
