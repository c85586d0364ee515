// Copyright 2026 The lsr-code Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lsr::testing {

/// Plain-data reference for mean nDCG@k over judged queries: exponential
/// gain, log2(rank + 1) discount, unjudged run queries skipped, queries with
/// no positive grade counted as 0.
inline double reference_ndcg(const std::map<std::string, std::vector<std::string>>& ranking,
                             const std::map<std::string, std::map<std::string, int>>& judgments, std::size_t k) {
  double total = 0.0;
  int counted = 0;
  for (const auto& [qid, docs] : ranking) {
    const auto j = judgments.find(qid);
    if (j == judgments.end()) continue;
    ++counted;
    std::vector<int> ideal;
    for (const auto& kv : j->second) ideal.push_back(kv.second);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t r = 1; r <= std::min(k, ideal.size()); ++r) idcg += (std::pow(2.0, ideal[r - 1]) - 1.0) / std::log2(r + 1.0);
    if (idcg == 0.0) continue;
    double dcg = 0.0;
    for (std::size_t r = 1; r <= std::min(k, docs.size()); ++r) {
      const auto g = j->second.find(docs[r - 1]);
      if (g != j->second.end()) dcg += (std::pow(2.0, g->second) - 1.0) / std::log2(r + 1.0);
    }
    total += dcg / idcg;
  }
  return counted == 0 ? 0.0 : total / counted;
}

}  // namespace lsr::testing
