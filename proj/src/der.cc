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

#include "diacal/der.h"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "diacal/error.h"

namespace diacal {

std::optional<double> DERBreakdown::der() const {
  if (total_speech <= 0) return std::nullopt;
  return static_cast<double>(errors()) / static_cast<double>(total_speech);
}

DERBreakdown& DERBreakdown::operator+=(const DERBreakdown& other) {
  false_alarm += other.false_alarm;
  missed += other.missed;
  confusion += other.confusion;
  total_speech += other.total_speech;
  return *this;
}

namespace {

using Cost = std::int64_t;

// Minimum-cost perfect matching on an n x n matrix (potentials method).
// Returns the optimal cost and fills row_to_col.
Cost hungarian_min(const std::vector<Cost>& cost, std::size_t n,
                   std::vector<int>* row_to_col) {
  constexpr Cost kInf = std::numeric_limits<Cost>::max() / 4;
  // 1-based arrays; index 0 is the virtual source column.
  std::vector<Cost> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<std::size_t> col_owner(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    col_owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = col_owner[j0];
      Cost delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Cost cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[col_owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  row_to_col->assign(n, -1);
  Cost total = 0;
  for (std::size_t j = 1; j <= n; ++j) {
    (*row_to_col)[col_owner[j] - 1] = static_cast<int>(j - 1);
    total += cost[(col_owner[j] - 1) * n + (j - 1)];
  }
  return total;
}

// Best total weight over the rows and columns not yet used.
Cost best_remaining(const std::vector<Cost>& weight, std::size_t n,
                    const std::vector<char>& row_used,
                    const std::vector<char>& col_used) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    if (!row_used[i]) rows.push_back(i);
    if (!col_used[i]) cols.push_back(i);
  }
  const std::size_t m = rows.size();
  if (m == 0) return 0;
  std::vector<Cost> cost(m * m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      cost[a * m + b] = -weight[rows[a] * n + cols[b]];
    }
  }
  std::vector<int> unused;
  return -hungarian_min(cost, m, &unused);
}

}  // namespace

std::vector<int> max_weight_assignment(std::span<const std::int64_t> weights,
                                       std::size_t rows, std::size_t cols) {
  if (weights.size() != rows * cols) {
    throw Error(fmt::format("assignment: {} weights for a {}x{} matrix",
                            weights.size(), rows, cols));
  }
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // Pad to square with zero-weight dummy rows/columns.
  std::vector<Cost> weight(n * n, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) weight[i * n + j] = weights[i * cols + j];
  }
  const Cost optimum = best_remaining(weight, n, std::vector<char>(n, 0),
                                      std::vector<char>(n, 0));

  // Fix rows one at a time to the smallest column that keeps the optimum
  // reachable. Dummy columns are interchangeable, so only the first free
  // one is tried.
  std::vector<char> row_used(n, 0), col_used(n, 0);
  std::vector<int> result(rows, -1);
  Cost fixed = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    row_used[i] = 1;
    bool placed = false;
    bool tried_dummy = false;
    for (std::size_t j = 0; j < n && !placed; ++j) {
      if (col_used[j]) continue;
      const bool dummy = j >= cols;
      if (dummy && tried_dummy) continue;
      tried_dummy = tried_dummy || dummy;
      col_used[j] = 1;
      const Cost w = weight[i * n + j];
      if (fixed + w + best_remaining(weight, n, row_used, col_used) == optimum) {
        fixed += w;
        result[i] = dummy ? -1 : static_cast<int>(j);
        placed = true;
      } else {
        col_used[j] = 0;
      }
    }
  }
  return result;
}

SpeakerMapping optimal_speaker_mapping(const ActivityMatrix& pred,
                                       const ActivityMatrix& ref) {
  if (pred.num_frames() != ref.num_frames()) {
    throw Error(fmt::format("speaker mapping: {} predicted vs {} reference "
                            "frames",
                            pred.num_frames(), ref.num_frames()));
  }
  const std::size_t np = pred.num_speakers();
  const std::size_t nr = ref.num_speakers();
  std::vector<std::int64_t> coactive(np * nr, 0);
  for (std::size_t t = 0; t < pred.num_frames(); ++t) {
    for (std::size_t p = 0; p < np; ++p) {
      if (!pred.at(t, p)) continue;
      for (std::size_t r = 0; r < nr; ++r) {
        coactive[p * nr + r] += ref.at(t, r);
      }
    }
  }
  return SpeakerMapping{max_weight_assignment(coactive, np, nr)};
}

DERBreakdown frame_der_counts(std::span<const std::uint8_t> pred_frame,
                              std::span<const std::uint8_t> ref_frame,
                              const SpeakerMapping& mapping) {
  std::int64_t n_pred = 0, n_ref = 0, n_correct = 0;
  for (std::size_t p = 0; p < pred_frame.size(); ++p) {
    if (!pred_frame[p]) continue;
    ++n_pred;
    const int r = p < mapping.pred_to_ref.size() ? mapping[p]
                                                 : SpeakerMapping::kUnmapped;
    if (r != SpeakerMapping::kUnmapped &&
        static_cast<std::size_t>(r) < ref_frame.size() && ref_frame[r]) {
      ++n_correct;
    }
  }
  for (std::uint8_t v : ref_frame) n_ref += v != 0;
  DERBreakdown out;
  out.false_alarm = std::max<std::int64_t>(0, n_pred - n_ref);
  out.missed = std::max<std::int64_t>(0, n_ref - n_pred);
  out.confusion = std::min(n_pred, n_ref) - n_correct;
  out.total_speech = n_ref;
  return out;
}

std::vector<WindowSpan> window_spans(std::int64_t num_frames,
                                     std::int64_t length,
                                     std::int64_t stride) {
  if (length < 1 || stride < 1) {
    throw Error(fmt::format("window layout: length {} and stride {} frames "
                            "must be positive",
                            length, stride));
  }
  std::vector<WindowSpan> spans;
  for (std::int64_t begin = 0; begin < num_frames; begin += stride) {
    const std::int64_t end = std::min(begin + length, num_frames);
    spans.push_back({begin, end});
    if (end == num_frames) break;
  }
  return spans;
}

std::vector<WindowSpan> window_spans(const PosteriorTrack& track) {
  const double fr = track.grid.frame_rate;
  return window_spans(track.grid.num_frames,
                      std::max<std::int64_t>(1, seconds_to_frames(track.window_length, fr)),
                      std::max<std::int64_t>(1, seconds_to_frames(track.window_stride, fr)));
}

LocalDerResult local_der(const PosteriorTrack& track,
                         const PowersetMapping& mapping,
                         const AnnotationSet& reference) {
  if (!reference.contains(track.file_id)) {
    throw Error("local DER: no reference annotations for file '" +
                track.file_id + "'");
  }
  if (track.num_classes != mapping.num_classes()) {
    throw Error(fmt::format("local DER: {} has {} classes, mapping has {}",
                            track.file_id, track.num_classes,
                            mapping.num_classes()));
  }
  const auto segments = reference.segments(track.file_id);
  const auto k = static_cast<std::size_t>(mapping.max_speakers());
  const auto s_max = mapping.max_simultaneous();

  LocalDerResult result;
  result.file_id = track.file_id;
  for (const WindowSpan& win : window_spans(track)) {
    const auto len = static_cast<std::size_t>(win.end_frame - win.begin_frame);
    std::vector<TopLabel> labels(len);
    ActivityMatrix pred(len, k);
    for (std::size_t t = 0; t < len; ++t) {
      labels[t] = top_label(track.row(win.begin_frame + static_cast<std::int64_t>(t)));
      for (int s : mapping.speakers_of(labels[t].class_index)) pred.set(t, s, 1);
    }
    const WindowReference ref = rasterize(segments, track.grid.frame_rate,
                                          win.begin_frame, win.end_frame);
    const SpeakerMapping align = optimal_speaker_mapping(pred, ref.activity);

    for (std::size_t t = 0; t < len; ++t) {
      WindowFrame wf;
      wf.frame = win.begin_frame + static_cast<std::int64_t>(t);
      wf.confidence = labels[t].confidence;
      wf.counts = frame_der_counts(pred.row(t), ref.activity.row(t), align);

      // Reference class: the K most prominent speakers, capped at S active
      // (lowest indices first). The prediction is correct when its speakers,
      // mapped to reference indices, form exactly that set.
      std::vector<int> ref_set;
      for (std::size_t r = 0; r < std::min(k, ref.activity.num_speakers()); ++r) {
        if (ref.activity.at(t, r) && static_cast<int>(ref_set.size()) < s_max) {
          ref_set.push_back(static_cast<int>(r));
        }
      }
      std::vector<int> pred_set;
      bool representable = true;
      for (std::size_t p = 0; p < k; ++p) {
        if (!pred.at(t, p)) continue;
        if (align[p] == SpeakerMapping::kUnmapped) {
          representable = false;
          break;
        }
        pred_set.push_back(align[p]);
      }
      std::sort(pred_set.begin(), pred_set.end());
      wf.correct = representable && pred_set == ref_set;

      result.total += wf.counts;
      result.frames.push_back(wf);
    }
  }
  return result;
}

}  // namespace diacal
