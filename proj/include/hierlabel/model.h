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

#ifndef HIERLABEL_MODEL_H_
#define HIERLABEL_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hierlabel/rng.h"
#include "json.hpp"

namespace hierlabel {

enum class ModelKind { kLinear, kMlp, kTinyCnn };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kLinear;
  std::size_t input_dim = 0;  // linear / mlp
  std::size_t channels = 3;   // tinycnn
  std::size_t height = 0;     // tinycnn
  std::size_t width = 0;      // tinycnn
  std::size_t hidden = 64;    // mlp
  std::vector<std::size_t> conv_channels = {8, 16};  // tinycnn
  std::size_t outputs = 0;

  // linear: (d + 1) * out
  // mlp:    (d + 1) * h + (h + 1) * out
  // tinycnn: c1 * (9 * cin + 1) + c2 * (9 * c1 + 1) + (c2 + 1) * out
  std::size_t parameter_count() const;
  std::size_t input_size() const;
  // Throws kInvalidArgument on zero sizes or, for tinycnn, images smaller
  // than 4x4 or a conv_channels list that is not of length 2.
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

// Intermediate values kept by forward() for backward().
struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden;  // mlp, after rectification
  std::vector<double> conv1;   // tinycnn, after rectification (c1 x H x W)
  std::vector<std::uint32_t> pool1_arg;
  std::vector<double> pool1;   // c1 x H/2 x W/2
  std::vector<double> conv2;   // after rectification (c2 x H/2 x W/2)
  std::vector<std::uint32_t> pool2_arg;
  std::vector<double> pool2;   // c2 x H/4 x W/4
  std::vector<double> pooled;  // global average, c2
};

// Last convolutional activation of the tiny CNN together with the gradient of
// a score combination with respect to it.
struct ConvActivation {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> activation;  // channel-major
  std::vector<double> gradient;
};

class Model {
 public:
  explicit Model(ModelSpec spec);
  Model(ModelSpec spec, std::vector<double> params);

  const ModelSpec& spec() const { return spec_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases. For
  // convolutions the fans cover the 3x3 receptive field.
  void init_glorot(Rng& rng);

  std::vector<double> forward(std::span<const double> input,
                              ForwardCache* cache = nullptr) const;

  // Adds d(score . dscores)/d(params) into dparams.
  void backward(const ForwardCache& cache, std::span<const double> dscores,
                std::span<double> dparams) const;

  // tinycnn only: the rectified second convolution and d(score .
  // dscores)/d(activation).
  ConvActivation last_conv(std::span<const double> input,
                           std::span<const double> dscores) const;

 private:
  ModelSpec spec_;
  std::vector<double> params_;
};

}  // namespace hierlabel

#endif  // HIERLABEL_MODEL_H_
