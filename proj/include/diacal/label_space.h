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

#ifndef DIACAL_LABEL_SPACE_H_
#define DIACAL_LABEL_SPACE_H_

#include <cstdint>
#include <span>
#include <vector>

namespace diacal {

// Tolerance on |sum(row) - 1| for a probability row to be accepted.
inline constexpr double kProbabilitySumTolerance = 1e-6;

// Size of the speaker-subset label space: at most `max_speakers` local
// speakers, at most `max_simultaneous` of them active in the same frame.
class PowersetConfig {
 public:
  // Throws diacal::Error unless 1 <= max_simultaneous <= max_speakers.
  PowersetConfig(int max_speakers, int max_simultaneous);

  int max_speakers() const { return max_speakers_; }
  int max_simultaneous() const { return max_simultaneous_; }

 private:
  int max_speakers_;
  int max_simultaneous_;
};

// One activity flag per local speaker.
using Multilabel = std::vector<std::uint8_t>;

// Ordered list of speaker subsets, one per powerset class.
//
// Class 0 is the empty set (nonspeech); classes are sorted by subset size,
// then lexicographically by speaker indices. With 3 speakers and at most 2
// simultaneous ones this gives {}, {0}, {1}, {2}, {0,1}, {0,2}, {1,2}.
class PowersetMapping {
 public:
  explicit PowersetMapping(const PowersetConfig& config);

  int num_classes() const { return static_cast<int>(classes_.size()); }
  int max_speakers() const { return config_.max_speakers(); }
  int max_simultaneous() const { return config_.max_simultaneous(); }

  // Speaker indices of a class, ascending.
  const std::vector<int>& speakers_of(int class_index) const;

  // Activity vector of length max_speakers(). Throws on out-of-range index.
  Multilabel to_multilabel(int class_index) const;

  // Class whose subset equals the active set. When more than
  // max_simultaneous() speakers are active, only the lowest-index ones are
  // kept (callers order speakers by prominence, so index 0 is the most
  // prominent). Throws if the vector length is not max_speakers().
  int to_class(std::span<const std::uint8_t> activity) const;

 private:
  PowersetConfig config_;
  std::vector<std::vector<int>> classes_;
  // Bitmask of active speakers -> class index, -1 when not representable.
  std::vector<int> class_of_mask_;
};

PowersetMapping build_powerset_mapping(const PowersetConfig& config);

struct TopLabel {
  int class_index = 0;
  double confidence = 0.0;
};

// Argmax of a probability row (ties go to the lowest index) and its value.
// Throws diacal::Error for an empty row, a negative or non-finite entry, or
// a sum further than kProbabilitySumTolerance from 1.
TopLabel top_label(std::span<const double> probabilities);
TopLabel top_label(std::span<const float> probabilities);

}  // namespace diacal

#endif  // DIACAL_LABEL_SPACE_H_
