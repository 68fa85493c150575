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

#include "diacal/synth.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "diacal/error.h"

namespace diacal {

void ConversationParams::validate() const {
  if (n_speakers < 1) throw Error("synth: n_speakers must be >= 1");
  if (!(duration > 0.0)) throw Error("synth: duration must be positive");
  if (!(turn_on_rate > 0.0 && turn_on_rate < 1.0) ||
      !(turn_off_rate > 0.0 && turn_off_rate < 1.0)) {
    throw Error("synth: turn rates must lie in (0, 1)");
  }
  if (!(overlap_bias > 0.0 && overlap_bias < 1.0)) {
    throw Error("synth: overlap_bias must lie in (0, 1)");
  }
  if (max_simultaneous < 1) throw Error("synth: max_simultaneous must be >= 1");
  if (!(frame_rate > 0.0)) throw Error("synth: frame_rate must be positive");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

AnnotationSet gen_reference(const ConversationParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double fr = params.frame_rate;
  const std::int64_t num_frames = seconds_to_frames(params.duration, fr);
  const double p_on = 1.0 - std::pow(1.0 - params.turn_on_rate, 1.0 / fr);
  const double p_off = 1.0 - std::pow(1.0 - params.turn_off_rate, 1.0 / fr);
  const double overlap_odds = params.overlap_bias / (1.0 - params.overlap_bias);

  const int n = params.n_speakers;
  std::vector<char> active(n, 0);
  std::vector<std::int64_t> run_start(n, -1);
  AnnotationSet out;
  auto close_run = [&](int s, std::int64_t end_frame) {
    out.add({params.file_id, fmt::format("spk{}", s), run_start[s] / fr,
             (end_frame - run_start[s]) / fr});
    run_start[s] = -1;
  };

  for (std::int64_t t = 0; t < num_frames; ++t) {
    int n_active = 0;
    for (char a : active) n_active += a;
    // Decide every speaker against the state at the start of the frame.
    std::vector<char> next = active;
    int next_active = n_active;
    for (int s = 0; s < n; ++s) {
      const double u = unif(rng);
      if (active[s]) {
        if (u < p_off) {
          next[s] = 0;
          --next_active;
        }
      } else {
        const bool others = n_active > 0;
        const double p = std::min(1.0, others ? p_on * overlap_odds : p_on);
        if (u < p && next_active < params.max_simultaneous) {
          next[s] = 1;
          ++next_active;
        }
      }
    }
    for (int s = 0; s < n; ++s) {
      if (next[s] && run_start[s] < 0) run_start[s] = t;
      if (!next[s] && run_start[s] >= 0) close_run(s, t);
    }
    active.swap(next);
  }
  for (int s = 0; s < n; ++s) {
    if (run_start[s] >= 0) close_run(s, num_frames);
  }
  return out;
}

namespace {

double sample_beta(std::mt19937_64& rng, double alpha, double beta) {
  std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

const ErrorRegion* find_region(const CalibrationProfile& profile, double t) {
  for (const ErrorRegion& r : profile.error_regions) {
    if (t >= r.start && t < r.end) return &r;
  }
  return nullptr;
}

}  // namespace

PosteriorTrack gen_posteriors(const AnnotationSet& reference,
                              const std::string& file_id,
                              const PowersetMapping& mapping,
                              const CalibrationProfile& profile,
                              const FrameGrid& grid, const SynthWindow& window,
                              std::uint64_t seed) {
  if (!(profile.gamma > 0.0)) throw Error("synth: gamma must be positive");
  if (!(profile.beta_alpha > 0.0) || !(profile.beta_beta > 0.0)) {
    throw Error("synth: Beta parameters must be positive");
  }
  const int num_classes = mapping.num_classes();
  const int k = mapping.max_speakers();
  const double floor_conf = 1.0 / num_classes;

  const WindowReference file_ref =
      rasterize(reference.segments(file_id), grid.frame_rate, 0, grid.num_frames);
  if (static_cast<int>(file_ref.speakers.size()) > k) {
    throw Error(fmt::format("synth: {} has {} speakers, mapping allows {}",
                            file_id, file_ref.speakers.size(), k));
  }

  PosteriorTrack track;
  track.file_id = file_id;
  track.grid = grid;
  track.num_classes = num_classes;
  track.window_length = static_cast<float>(window.length);
  track.window_stride = static_cast<float>(window.stride);
  track.probs.resize(static_cast<std::size_t>(grid.num_frames) * num_classes);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> other_class(0, num_classes - 2);
  auto draw_range = [&](const ConfidenceRange& r) {
    const double lo = std::max(floor_conf, r.low);
    const double hi = std::max(lo, std::min(1.0, r.high));
    return lo + (hi - lo) * unif(rng);
  };

  Multilabel activity(k, 0);
  const std::size_t ref_cols = file_ref.activity.num_speakers();
  for (std::int64_t t = 0; t < grid.num_frames; ++t) {
    std::fill(activity.begin(), activity.end(), 0);
    for (std::size_t s = 0; s < ref_cols; ++s) {
      activity[s] = file_ref.activity.at(t, s);
    }
    const int true_class = mapping.to_class(activity);
    const double time = (t + 0.5) / grid.frame_rate;
    const ErrorRegion* region = find_region(profile, time);

    double c;
    if (region && region->confidence) {
      c = draw_range(*region->confidence);
    } else if (profile.overlap_confidence &&
               file_ref.activity.active_count(t) >= 2) {
      c = draw_range(*profile.overlap_confidence);
    } else {
      c = floor_conf + (1.0 - floor_conf) *
                           sample_beta(rng, profile.beta_alpha, profile.beta_beta);
    }
    const double p_correct =
        region && region->degraded_accuracy ? *region->degraded_accuracy : c;

    int argmax = true_class;
    if (num_classes > 1 && unif(rng) >= p_correct) {
      const int draw = other_class(rng);
      argmax = draw >= true_class ? draw + 1 : draw;
    }

    // Sharpen (or soften) the governing distribution (c, rest uniform).
    double top = c;
    if (profile.gamma != 1.0 && num_classes > 1) {
      const double rest = (1.0 - c) / (num_classes - 1);
      const double a = std::pow(c, profile.gamma);
      const double b = (num_classes - 1) * std::pow(rest, profile.gamma);
      top = a / (a + b);
    }
    top = std::clamp(top, floor_conf, 1.0);
    const double other =
        num_classes > 1 ? (1.0 - top) / (num_classes - 1) : 0.0;
    float* row = track.probs.data() + t * num_classes;
    for (int j = 0; j < num_classes; ++j) {
      row[j] = static_cast<float>(j == argmax ? top : other);
    }
  }
  return track;
}

}  // namespace diacal
