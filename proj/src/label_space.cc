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

#include "diacal/label_space.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "diacal/error.h"

namespace diacal {

namespace {

// Class lookup goes through a bitmask table of size 2^K.
constexpr int kMaxSpeakers = 16;

// Appends every ascending subset of {0..n-1} of the given size, in
// lexicographic order.
void append_subsets(int n, int size, std::vector<std::vector<int>>* out) {
  std::vector<int> current(size);
  for (int i = 0; i < size; ++i) current[i] = i;
  if (size > n) return;
  while (true) {
    out->push_back(current);
    int pos = size - 1;
    while (pos >= 0 && current[pos] == n - size + pos) --pos;
    if (pos < 0) return;
    ++current[pos];
    for (int i = pos + 1; i < size; ++i) current[i] = current[i - 1] + 1;
  }
}

template <typename T>
TopLabel top_label_impl(std::span<const T> row) {
  if (row.empty()) throw Error("top_label: empty probability row");
  double sum = 0.0;
  TopLabel best;
  best.confidence = -1.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double p = static_cast<double>(row[i]);
    if (!std::isfinite(p) || p < 0.0) {
      throw Error("top_label: invalid probability " + std::to_string(p) +
                  " at index " + std::to_string(i));
    }
    sum += p;
    if (p > best.confidence) {
      best.confidence = p;
      best.class_index = static_cast<int>(i);
    }
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error("top_label: probabilities sum to " + std::to_string(sum));
  }
  return best;
}

}  // namespace

PowersetConfig::PowersetConfig(int max_speakers, int max_simultaneous)
    : max_speakers_(max_speakers), max_simultaneous_(max_simultaneous) {
  if (max_speakers < 1 || max_speakers > kMaxSpeakers) {
    throw Error("powerset: max_speakers must be in [1, " +
                std::to_string(kMaxSpeakers) + "], got " +
                std::to_string(max_speakers));
  }
  if (max_simultaneous < 1 || max_simultaneous > max_speakers) {
    throw Error("powerset: max_simultaneous must be in [1, max_speakers], got " +
                std::to_string(max_simultaneous));
  }
}

PowersetMapping::PowersetMapping(const PowersetConfig& config)
    : config_(config) {
  const int k = config.max_speakers();
  for (int size = 0; size <= config.max_simultaneous(); ++size) {
    append_subsets(k, size, &classes_);
  }
  class_of_mask_.assign(std::size_t{1} << k, -1);
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    unsigned mask = 0;
    for (int s : classes_[c]) mask |= 1u << s;
    class_of_mask_[mask] = static_cast<int>(c);
  }
}

const std::vector<int>& PowersetMapping::speakers_of(int class_index) const {
  if (class_index < 0 || class_index >= num_classes()) {
    throw Error("powerset: class index " + std::to_string(class_index) +
                " out of range [0, " + std::to_string(num_classes()) + ")");
  }
  return classes_[class_index];
}

Multilabel PowersetMapping::to_multilabel(int class_index) const {
  Multilabel out(max_speakers(), 0);
  for (int s : speakers_of(class_index)) out[s] = 1;
  return out;
}

int PowersetMapping::to_class(std::span<const std::uint8_t> activity) const {
  if (static_cast<int>(activity.size()) != max_speakers()) {
    throw Error("powerset: activity vector has length " +
                std::to_string(activity.size()) + ", expected " +
                std::to_string(max_speakers()));
  }
  unsigned mask = 0;
  int kept = 0;
  for (int s = 0; s < max_speakers() && kept < max_simultaneous(); ++s) {
    if (activity[s]) {
      mask |= 1u << s;
      ++kept;
    }
  }
  return class_of_mask_[mask];
}

PowersetMapping build_powerset_mapping(const PowersetConfig& config) {
  return PowersetMapping(config);
}

TopLabel top_label(std::span<const double> probabilities) {
  return top_label_impl(probabilities);
}

TopLabel top_label(std::span<const float> probabilities) {
  return top_label_impl(probabilities);
}

}  // namespace diacal
