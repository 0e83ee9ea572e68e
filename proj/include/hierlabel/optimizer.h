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

#ifndef HIERLABEL_OPTIMIZER_H_
#define HIERLABEL_OPTIMIZER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace hierlabel {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;

  // Throws kInvalidArgument unless lr > 0, 0 <= beta < 1, epsilon > 0 and
  // weight_decay >= 0.
  void validate() const;
};

nlohmann::json to_json(const AdamWConfig& cfg);
AdamWConfig adamw_config_from_json(const nlohmann::json& j);

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One AdamW update with bias-corrected moments. Weight decay is decoupled:
// params are first scaled by (1 - lr * weight_decay), then moved by the Adam
// step computed from the raw gradient.
void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamWState& state, const AdamWConfig& cfg);

}  // namespace hierlabel

#endif  // HIERLABEL_OPTIMIZER_H_
