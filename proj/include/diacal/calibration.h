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

#ifndef DIACAL_CALIBRATION_H_
#define DIACAL_CALIBRATION_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "diacal/der.h"

namespace diacal {

enum class BinKind { kUniform, kAdaptive };

// Confidence bins. Uniform bins are [e_i, e_{i+1}) with the last one closed
// at 1. Adaptive bins hold equal numbers of predictions: frames are ranked by
// (confidence, correctness) and split into N consecutive groups whose sizes
// differ by at most one; the edges record where each group starts.
struct BinScheme {
  std::vector<double> edges;  // N + 1 values, edges.front() = 1/C, back() = 1
  BinKind kind = BinKind::kUniform;

  int num_bins() const { return static_cast<int>(edges.size()) - 1; }
};

// N equally spaced bins over [1/class_count, 1].
BinScheme uniform_bin_edges(int class_count, int n_bins);

// Equal-population bins for the given confidences. The first edge is 1/C,
// lowered to the smallest confidence if that is below 1/C.
BinScheme adaptive_bin_edges(std::span<const double> confidences, int n_bins,
                             int class_count);

// One top-label prediction.
struct ScoredFrame {
  double confidence = 0.0;
  bool correct = false;
  std::optional<DERBreakdown> der_counts;
};

std::vector<ScoredFrame> to_scored_frames(std::span<const WindowFrame> frames);

struct BinStats {
  double low = 0.0;
  double high = 0.0;
  std::int64_t count = 0;
  double prop = 0.0;  // count / total predictions
  double acc = 0.0;   // mean correctness
  double conf = 0.0;  // mean confidence
  std::optional<double> der;

  // The reliability diagram's "difference to mean confidence".
  double gap() const { return acc - conf; }
};

struct EceResult {
  double ece = 0.0;
  std::vector<BinStats> bins;  // all N bins, empty ones with count 0
};

// Bin index of each frame. Throws diacal::Error when a confidence lies below
// the first edge or above 1 (beyond kProbabilitySumTolerance).
std::vector<int> assign_bins(std::span<const ScoredFrame> frames,
                             const BinScheme& scheme);

// ECE = sum_b prop(b) * |acc(b) - conf(b)|. Empty bins contribute nothing.
// Per-bin DER is filled in when every frame carries der_counts.
EceResult compute_ece(std::span<const ScoredFrame> frames,
                      const BinScheme& scheme);

// Non-empty bins only, in ascending confidence order.
std::vector<BinStats> reliability_diagram(std::span<const ScoredFrame> frames,
                                          const BinScheme& scheme);

// DER of the frames falling in each bin (N entries); nullopt for bins with no
// reference speech. Frames without der_counts are ignored.
std::vector<std::optional<double>> binwise_der(
    std::span<const ScoredFrame> frames, const BinScheme& scheme);

// CSV with header `bin_low,bin_high,prop,acc,conf,der`; der is left empty
// when undefined.
void write_reliability_csv(std::span<const BinStats> bins, std::ostream& out);

}  // namespace diacal

#endif  // DIACAL_CALIBRATION_H_
