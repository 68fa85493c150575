// Copyright (c) 2026 The diacal Authors
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

// Independent reference implementations used only by the tests.

#ifndef DIACAL_TESTS_ORACLES_H_
#define DIACAL_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "diacal/annotations.h"
#include "diacal/calibration.h"

namespace diacal::oracle {

// Exhaustive search over every permutation of the padded square problem, in
// lexicographic order; the first maximum wins. Returns row -> column (-1 for
// a dummy column) and the optimal value.
inline std::pair<std::vector<int>, std::int64_t> brute_force_assignment(
    const std::vector<std::int64_t>& w, std::size_t rows, std::size_t cols) {
  const std::size_t n = std::max(rows, cols);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  std::vector<int> best_rows;
  do {
    std::int64_t v = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (static_cast<std::size_t>(perm[i]) < cols) v += w[i * cols + perm[i]];
    }
    if (v > best) {
      best = v;
      best_rows.assign(rows, -1);
      for (std::size_t i = 0; i < rows; ++i) {
        if (static_cast<std::size_t>(perm[i]) < cols) best_rows[i] = perm[i];
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (n == 0) best = 0;
  return {best_rows, best};
}

// ECE by grouping frames per bin with a linear scan over the edges, then a
// weighted sum. Uniform schemes only.
inline double brute_force_ece(const std::vector<ScoredFrame>& frames,
                              const std::vector<double>& edges) {
  const int n_bins = static_cast<int>(edges.size()) - 1;
  std::map<int, std::vector<const ScoredFrame*>> groups;
  for (const ScoredFrame& f : frames) {
    int bin = n_bins - 1;
    for (int b = 0; b < n_bins; ++b) {
      if (f.confidence >= edges[b] && f.confidence < edges[b + 1]) {
        bin = b;
        break;
      }
    }
    if (f.confidence < edges[0]) bin = 0;
    groups[bin].push_back(&f);
  }
  double ece = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    auto it = groups.find(b);
    if (it == groups.end()) continue;
    std::int64_t correct = 0;
    double conf = 0.0;
    for (const ScoredFrame* f : it->second) {
      correct += f->correct ? 1 : 0;
      conf += f->confidence;
    }
    const auto count = static_cast<double>(it->second.size());
    const double prop = count / static_cast<double>(frames.size());
    ece += prop * std::abs(static_cast<double>(correct) / count - conf / count);
  }
  return ece;
}

// Random activity matrix.
inline ActivityMatrix random_activity(std::mt19937_64& rng, std::size_t frames,
                                      std::size_t speakers, double p_active) {
  std::bernoulli_distribution on(p_active);
  ActivityMatrix m(frames, speakers);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < speakers; ++s) m.set(t, s, on(rng) ? 1 : 0);
  }
  return m;
}

}  // namespace diacal::oracle

#endif  // DIACAL_TESTS_ORACLES_H_
