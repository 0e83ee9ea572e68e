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

#ifndef HIERLABEL_AGGREGATION_H_
#define HIERLABEL_AGGREGATION_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hierlabel/metrics.h"
#include "hierlabel/taxonomy.h"

namespace hierlabel {

enum class TieBreak { kNone, kMeanConfidence, kLeafOrder };

std::string to_string(TieBreak tie_break);

struct PatchVote {
  std::string slide_id;
  std::string leaf;
  double confidence = 0.0;
};

struct SlideVote {
  std::string slide_id;
  std::vector<std::string> patch_leaves;
  std::vector<double> patch_confidences;
  std::string winner;
  double support = 0.0;  // winner count / patch count
  TieBreak tie_break = TieBreak::kNone;
};

// Majority vote per slide. Ties on count go to the highest mean confidence,
// then to the lowest leaf index; the rule that decided is recorded. Slides
// are returned in order of first appearance.
std::vector<SlideVote> slide_mode(std::span<const PatchVote> patches,
                                  const Taxonomy& t);

// Treats every slide as one sample. Leaf scores for AUROC are the vote
// shares.
MetricReport slide_metrics(std::span<const SlideVote> votes,
                           const std::map<std::string, std::string>& truths,
                           const Taxonomy& t, const MergeMap* merge = nullptr);

// Columns: slide_id, winner, support, tie_break_used.
void write_slide_csv(const std::filesystem::path& path,
                     std::span<const SlideVote> votes);

}  // namespace hierlabel

#endif  // HIERLABEL_AGGREGATION_H_
