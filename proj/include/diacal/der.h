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

#ifndef DIACAL_DER_H_
#define DIACAL_DER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diacal/annotations.h"
#include "diacal/label_space.h"
#include "diacal/posteriors.h"

namespace diacal {

// Frame counts of a diarization error rate. Adding breakdowns is
// associative and commutative, so per-window or per-file results can be
// merged in any order.
struct DERBreakdown {
  std::int64_t false_alarm = 0;
  std::int64_t missed = 0;
  std::int64_t confusion = 0;
  std::int64_t total_speech = 0;

  std::int64_t errors() const { return false_alarm + missed + confusion; }
  // Undefined (nullopt) when there is no reference speech. May exceed 1.
  std::optional<double> der() const;

  DERBreakdown& operator+=(const DERBreakdown& other);
  friend DERBreakdown operator+(DERBreakdown a, const DERBreakdown& b) {
    return a += b;
  }
  bool operator==(const DERBreakdown&) const = default;
};

// Injective partial map from predicted local speakers to reference local
// speakers. pred_to_ref[p] == kUnmapped when p has no partner.
struct SpeakerMapping {
  static constexpr int kUnmapped = -1;
  std::vector<int> pred_to_ref;

  int operator[](std::size_t p) const { return pred_to_ref[p]; }
  bool operator==(const SpeakerMapping&) const = default;
};

// Solves the linear assignment problem on a square or rectangular weight
// matrix (rows x cols, row-major), maximizing the total weight. Every row is
// matched when rows <= cols and vice versa. Among optimal assignments the one
// whose row->column vector is lexicographically smallest is returned, with
// "no column" ordered after every real column.
std::vector<int> max_weight_assignment(std::span<const std::int64_t> weights,
                                       std::size_t rows, std::size_t cols);

// Aligns predicted and reference speakers of one window by maximizing the
// number of frames where both members of a pair are active.
SpeakerMapping optimal_speaker_mapping(const ActivityMatrix& pred,
                                       const ActivityMatrix& ref);

// Contribution of a single frame.
DERBreakdown frame_der_counts(std::span<const std::uint8_t> pred_frame,
                              std::span<const std::uint8_t> ref_frame,
                              const SpeakerMapping& mapping);

// One scored frame of one window.
struct WindowFrame {
  std::int64_t frame = 0;  // index on the file timeline
  double confidence = 0.0;
  bool correct = false;    // powerset class matches after alignment
  DERBreakdown counts;
};

struct WindowSpan {
  std::int64_t begin_frame = 0;
  std::int64_t end_frame = 0;
};

// Window layout used for scoring: windows of `length` frames every `stride`
// frames starting at 0; the last window is clipped to the end of the file.
std::vector<WindowSpan> window_spans(std::int64_t num_frames,
                                     std::int64_t length, std::int64_t stride);
std::vector<WindowSpan> window_spans(const PosteriorTrack& track);

struct LocalDerResult {
  std::string file_id;
  DERBreakdown total;
  // Every frame of every window, in window order.
  std::vector<WindowFrame> frames;
};

// Local DER of one file: every window is decoded (argmax over powerset
// classes), aligned to its own rasterized reference and scored on its own.
// Throws if the file has no entry in `reference` or the track's class count
// does not match `mapping`.
LocalDerResult local_der(const PosteriorTrack& track,
                         const PowersetMapping& mapping,
                         const AnnotationSet& reference);

}  // namespace diacal

#endif  // DIACAL_DER_H_
