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

#ifndef DIACAL_SYNTH_H_
#define DIACAL_SYNTH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diacal/annotations.h"
#include "diacal/label_space.h"
#include "diacal/posteriors.h"

namespace diacal {

// Random conversation: every speaker is an on/off Markov chain stepped at
// frame resolution.
struct ConversationParams {
  std::string file_id = "synth";
  int n_speakers = 3;
  double duration = 300.0;      // seconds
  double turn_on_rate = 0.15;   // per-second probability of starting a turn
  double turn_off_rate = 0.35;  // per-second probability of ending a turn
  // Turn-on probability is multiplied by overlap_bias / (1 - overlap_bias)
  // while another speaker is talking; 0.5 leaves it unchanged.
  double overlap_bias = 0.5;
  // Never more than this many speakers at once.
  int max_simultaneous = 2;
  double frame_rate = kDefaultFrameRate;
  std::uint64_t seed = 0;

  // Throws diacal::Error on out-of-range values.
  void validate() const;
};

// Speakers are named spk0, spk1, ...; runs of active frames become turns.
AnnotationSet gen_reference(const ConversationParams& params);

struct ConfidenceRange {
  double low = 0.0;
  double high = 1.0;
};

// A stretch of the file where the model behaves differently.
struct ErrorRegion {
  double start = 0.0;
  double end = 0.0;
  // Probability that the argmax is right, replacing the governing confidence.
  std::optional<double> degraded_accuracy;
  // Governing confidence drawn uniformly from this range instead of the Beta
  // prior.
  std::optional<ConfidenceRange> confidence;
};

struct CalibrationProfile {
  // Governing confidence is 1/C + (1 - 1/C) * Beta(alpha, beta).
  double beta_alpha = 5.0;
  double beta_beta = 1.2;
  // Sharpening exponent: the reported distribution is the governing one
  // raised to gamma and renormalized. gamma = 1 is calibrated by construction.
  double gamma = 1.0;
  std::vector<ErrorRegion> error_regions;
  // When set, frames with two or more reference speakers draw their
  // governing confidence from this range.
  std::optional<ConfidenceRange> overlap_confidence;
};

struct SynthWindow {
  double length = 5.0;
  double stride = 5.0;
};

// Posterior track for one file of `reference`. Per frame, with probability
// equal to the governing confidence c (or degraded_accuracy) the argmax is the
// reference powerset class, otherwise a uniformly drawn wrong class. The top
// probability is c^gamma / (c^gamma + (C-1) ((1-c)/(C-1))^gamma) and the rest
// of the mass is spread evenly over the other classes. Reference speakers are
// indexed by descending total speech; the file must not have more speakers
// than the mapping allows.
PosteriorTrack gen_posteriors(const AnnotationSet& reference,
                              const std::string& file_id,
                              const PowersetMapping& mapping,
                              const CalibrationProfile& profile,
                              const FrameGrid& grid, const SynthWindow& window,
                              std::uint64_t seed);

// Derives independent per-file / per-checkpoint seeds from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace diacal

#endif  // DIACAL_SYNTH_H_
