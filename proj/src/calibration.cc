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

#include "diacal/calibration.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "diacal/error.h"

namespace diacal {

BinScheme uniform_bin_edges(int class_count, int n_bins) {
  if (class_count < 2) {
    throw Error(fmt::format("bins: class count must be >= 2, got {}", class_count));
  }
  if (n_bins < 1) throw Error(fmt::format("bins: need >= 1 bin, got {}", n_bins));
  BinScheme scheme;
  scheme.kind = BinKind::kUniform;
  const double low = 1.0 / class_count;
  const double width = (1.0 - low) / n_bins;
  scheme.edges.resize(n_bins + 1);
  for (int i = 0; i < n_bins; ++i) scheme.edges[i] = low + i * width;
  scheme.edges[n_bins] = 1.0;
  return scheme;
}

BinScheme adaptive_bin_edges(std::span<const double> confidences, int n_bins,
                             int class_count) {
  if (confidences.empty()) throw Error("adaptive bins: no confidences");
  if (class_count < 2) {
    throw Error(fmt::format("bins: class count must be >= 2, got {}", class_count));
  }
  if (n_bins < 1) throw Error(fmt::format("bins: need >= 1 bin, got {}", n_bins));
  std::vector<double> sorted(confidences.begin(), confidences.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  BinScheme scheme;
  scheme.kind = BinKind::kAdaptive;
  scheme.edges.resize(n_bins + 1);
  scheme.edges[0] = std::min(1.0 / class_count, sorted.front());
  for (int k = 1; k < n_bins; ++k) {
    const std::size_t rank = k * n / n_bins;
    scheme.edges[k] = rank < n ? sorted[rank] : 1.0;
  }
  scheme.edges[n_bins] = 1.0;
  return scheme;
}

std::vector<ScoredFrame> to_scored_frames(std::span<const WindowFrame> frames) {
  std::vector<ScoredFrame> out;
  out.reserve(frames.size());
  for (const WindowFrame& f : frames) {
    out.push_back({f.confidence, f.correct, f.counts});
  }
  return out;
}

std::vector<int> assign_bins(std::span<const ScoredFrame> frames,
                             const BinScheme& scheme) {
  const int n_bins = scheme.num_bins();
  if (n_bins < 1) throw Error("bins: empty bin scheme");
  const double low = scheme.edges.front();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double c = frames[i].confidence;
    if (!(c >= low - kProbabilitySumTolerance) ||
        !(c <= 1.0 + kProbabilitySumTolerance)) {
      throw Error(fmt::format("bins: confidence {} of frame {} outside [{}, 1]",
                              c, i, low));
    }
  }

  std::vector<int> bin(frames.size());
  if (scheme.kind == BinKind::kUniform) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto it = std::upper_bound(scheme.edges.begin(), scheme.edges.end(),
                                       frames[i].confidence);
      const int b = static_cast<int>(it - scheme.edges.begin()) - 1;
      bin[i] = std::clamp(b, 0, n_bins - 1);
    }
    return bin;
  }

  // Adaptive: rank order, split into groups of near-equal size. Frames equal
  // in both confidence and correctness are interchangeable, so the result
  // does not depend on input order.
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (frames[a].confidence != frames[b].confidence) {
      return frames[a].confidence < frames[b].confidence;
    }
    return frames[a].correct < frames[b].correct;
  });
  const std::size_t n = frames.size();
  for (std::size_t rank = 0; rank < n; ++rank) {
    // Bin k covers ranks [k*n/N, (k+1)*n/N).
    int k = static_cast<int>((rank * n_bins) / n);
    while (k + 1 < n_bins && (k + 1) * n / n_bins <= rank) ++k;
    while (k > 0 && k * n / n_bins > rank) --k;
    bin[order[rank]] = k;
  }
  return bin;
}

EceResult compute_ece(std::span<const ScoredFrame> frames,
                      const BinScheme& scheme) {
  const int n_bins = scheme.num_bins();
  const std::vector<int> bin = assign_bins(frames, scheme);

  std::vector<std::int64_t> count(n_bins, 0), correct(n_bins, 0);
  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<DERBreakdown> der(n_bins);
  bool all_der = !frames.empty();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const int b = bin[i];
    ++count[b];
    correct[b] += frames[i].correct ? 1 : 0;
    conf_sum[b] += frames[i].confidence;
    if (frames[i].der_counts) {
      der[b] += *frames[i].der_counts;
    } else {
      all_der = false;
    }
  }

  EceResult result;
  const double total = static_cast<double>(frames.size());
  for (int b = 0; b < n_bins; ++b) {
    BinStats s;
    s.low = scheme.edges[b];
    s.high = scheme.edges[b + 1];
    s.count = count[b];
    if (count[b] > 0) {
      s.prop = static_cast<double>(count[b]) / total;
      s.acc = static_cast<double>(correct[b]) / static_cast<double>(count[b]);
      s.conf = conf_sum[b] / static_cast<double>(count[b]);
      if (all_der) s.der = der[b].der();
      result.ece += s.prop * std::abs(s.acc - s.conf);
    }
    result.bins.push_back(s);
  }
  return result;
}

std::vector<BinStats> reliability_diagram(std::span<const ScoredFrame> frames,
                                          const BinScheme& scheme) {
  EceResult r = compute_ece(frames, scheme);
  std::vector<BinStats> out;
  for (const BinStats& s : r.bins) {
    if (s.count > 0) out.push_back(s);
  }
  return out;
}

std::vector<std::optional<double>> binwise_der(
    std::span<const ScoredFrame> frames, const BinScheme& scheme) {
  const std::vector<int> bin = assign_bins(frames, scheme);
  std::vector<DERBreakdown> der(scheme.num_bins());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].der_counts) der[bin[i]] += *frames[i].der_counts;
  }
  std::vector<std::optional<double>> out;
  out.reserve(der.size());
  for (const DERBreakdown& d : der) out.push_back(d.der());
  return out;
}

void write_reliability_csv(std::span<const BinStats> bins, std::ostream& out) {
  out << "bin_low,bin_high,prop,acc,conf,der\n";
  for (const BinStats& s : bins) {
    out << fmt::format("{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},", s.low, s.high,
                       s.prop, s.acc, s.conf);
    if (s.der) out << fmt::format("{:.6f}", *s.der);
    out << '\n';
  }
}

}  // namespace diacal
