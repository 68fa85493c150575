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

#ifndef DIACAL_POSTERIORS_H_
#define DIACAL_POSTERIORS_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "diacal/annotations.h"

namespace diacal {

// Powerset class probabilities of one file, one row per frame.
//
// The segmentation model runs on sliding windows of `window_length` seconds
// every `window_stride` seconds; rows are laid out on the file timeline and
// scoring re-cuts them into those windows.
struct PosteriorTrack {
  std::string file_id;
  FrameGrid grid;
  int num_classes = 0;
  float window_length = 5.0f;
  float window_stride = 5.0f;
  std::vector<float> probs;  // num_frames x num_classes, row-major

  std::span<const float> row(std::int64_t t) const {
    return {probs.data() + t * num_classes,
            static_cast<std::size_t>(num_classes)};
  }

  // Throws diacal::Error on inconsistent sizes, non-positive window length or
  // frame rate, or a row that is not a probability vector.
  void validate() const;
};

// PST1 binary layout, all little-endian:
//   "PST1" | u16 version=1 | u16 reserved=0 | f64 frame_rate | u64 num_frames
//   | u32 num_classes | f32 window_length_s | f32 window_stride_s
//   | f32[num_frames * num_classes] | u32 id_len | id bytes (UTF-8)
inline constexpr std::uint16_t kPosteriorFormatVersion = 1;

void write_posteriors(const PosteriorTrack& track, std::ostream& out);
// Throws FormatError on bad magic, version mismatch, truncated payload or an
// invalid probability row.
PosteriorTrack read_posteriors(std::istream& in);

void write_posteriors_file(const PosteriorTrack& track, const std::string& path);
PosteriorTrack read_posteriors_file(const std::string& path);

// Imports a hand-written CSV with header `frame,c0,...,c{C-1}`. Frames must
// appear in order starting at 0.
PosteriorTrack read_posteriors_csv(std::istream& in, const std::string& file_id,
                                   double frame_rate, float window_length,
                                   float window_stride);

}  // namespace diacal

#endif  // DIACAL_POSTERIORS_H_
