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

#include "hierlabel/aggregation.h"

#include <algorithm>
#include <unordered_map>

#include "hierlabel/csv.h"
#include "hierlabel/error.h"

namespace hierlabel {

std::string to_string(TieBreak tie_break) {
  switch (tie_break) {
    case TieBreak::kNone:
      return "none";
    case TieBreak::kMeanConfidence:
      return "mean_confidence";
    case TieBreak::kLeafOrder:
      return "leaf_order";
  }
  return "none";
}

std::vector<SlideVote> slide_mode(std::span<const PatchVote> patches,
                                  const Taxonomy& t) {
  std::vector<SlideVote> votes;
  std::unordered_map<std::string, std::size_t> slot;
  for (const PatchVote& p : patches) {
    if (p.slide_id.empty()) {
      fail(ErrorKind::kInvalidArgument, "patch prediction without slide_id");
    }
    t.leaf_index(p.leaf);
    auto [it, inserted] = slot.emplace(p.slide_id, votes.size());
    if (inserted) {
      votes.emplace_back();
      votes.back().slide_id = p.slide_id;
    }
    SlideVote& v = votes[it->second];
    v.patch_leaves.push_back(p.leaf);
    v.patch_confidences.push_back(p.confidence);
  }

  const std::size_t k = t.leaf_count();
  for (SlideVote& v : votes) {
    if (v.patch_leaves.empty()) {
      fail(ErrorKind::kInvalidArgument, "slide '" + v.slide_id + "' has no patches");
    }
    std::vector<std::size_t> count(k, 0);
    std::vector<std::vector<double>> confs(k);
    for (std::size_t i = 0; i < v.patch_leaves.size(); ++i) {
      const std::size_t leaf = t.leaf_index(v.patch_leaves[i]);
      ++count[leaf];
      confs[leaf].push_back(v.patch_confidences[i]);
    }
    // Sorted summation keeps the mean independent of patch order.
    std::vector<double> conf_sum(k, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      std::sort(confs[l].begin(), confs[l].end());
      for (const double c : confs[l]) conf_sum[l] += c;
    }
    std::size_t best_count = 0;
    for (const std::size_t c : count) best_count = std::max(best_count, c);
    std::vector<std::size_t> tied;
    for (std::size_t l = 0; l < k; ++l) {
      if (count[l] == best_count) tied.push_back(l);
    }
    std::size_t winner = tied.front();
    if (tied.size() > 1) {
      double best_mean = -1.0;
      std::vector<std::size_t> still_tied;
      for (const std::size_t l : tied) {
        const double mean = conf_sum[l] / static_cast<double>(count[l]);
        if (mean > best_mean) {
          best_mean = mean;
          still_tied = {l};
        } else if (mean == best_mean) {
          still_tied.push_back(l);
        }
      }
      winner = still_tied.front();
      v.tie_break = still_tied.size() > 1 ? TieBreak::kLeafOrder
                                          : TieBreak::kMeanConfidence;
    }
    v.winner = t.leaf_id(winner);
    v.support = static_cast<double>(best_count) /
                static_cast<double>(v.patch_leaves.size());
  }
  return votes;
}

MetricReport slide_metrics(std::span<const SlideVote> votes,
                           const std::map<std::string, std::string>& truths,
                           const Taxonomy& t, const MergeMap* merge) {
  std::vector<std::size_t> preds, ys;
  std::vector<std::vector<double>> shares;
  for (const SlideVote& v : votes) {
    const auto it = truths.find(v.slide_id);
    if (it == truths.end()) {
      fail(ErrorKind::kInvalidArgument, "no truth for slide '" + v.slide_id + "'");
    }
    preds.push_back(t.leaf_index(v.winner));
    ys.push_back(t.leaf_index(it->second));
    std::vector<double> share(t.leaf_count(), 0.0);
    for (const std::string& leaf : v.patch_leaves) share[t.leaf_index(leaf)] += 1.0;
    for (double& s : share) s /= static_cast<double>(v.patch_leaves.size());
    shares.push_back(std::move(share));
  }
  return evaluate(t, preds, ys, &shares, merge);
}

void write_slide_csv(const std::filesystem::path& path,
                     std::span<const SlideVote> votes) {
  CsvTable table;
  table.header = {"slide_id", "winner", "support", "tie_break_used"};
  for (const SlideVote& v : votes) {
    table.rows.push_back({v.slide_id, v.winner, format_double(v.support),
                          to_string(v.tie_break)});
  }
  write_csv(path, table);
}

}  // namespace hierlabel
