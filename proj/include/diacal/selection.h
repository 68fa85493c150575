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

#ifndef DIACAL_SELECTION_H_
#define DIACAL_SELECTION_H_

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "diacal/annotations.h"
#include "diacal/der.h"
#include "diacal/label_space.h"
#include "diacal/posteriors.h"

namespace diacal {

// A contiguous span of one file, in seconds. Boundaries sit on frames.
struct Region {
  std::string file_id;
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  bool operator==(const Region&) const = default;
};

// Frame range [begin, end) of a region on a grid of the given rate.
struct FrameRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;
};
FrameRange to_frames(const Region& region, double frame_rate);

enum class StrategyKind { kWorstConfidence, kRandom };

const char* to_string(StrategyKind kind);
// Accepts "worst-confidence" / "worst_confidence" and "random".
StrategyKind parse_strategy(const std::string& name);

struct SelectionStrategy {
  StrategyKind kind = StrategyKind::kWorstConfidence;
  std::uint64_t seed = 0;      // random only
  double region_length = 7.5;  // seconds
  double stride = 2.5;         // seconds between candidate starts
};

struct ScoredRegion {
  Region region;
  double score = 0.0;  // mean top-label confidence
  FrameRange frames;
};

// Sliding candidates of `region_length` every `stride` seconds (both snapped
// down to whole frames), each scored by the mean top-label confidence of its
// frames. A file shorter than one region yields no candidates.
std::vector<ScoredRegion> score_candidate_regions(const PosteriorTrack& track,
                                                  double region_length,
                                                  double stride);

struct Selection {
  std::vector<ScoredRegion> regions;  // in selection order
  double total_seconds = 0.0;
  bool shortfall = false;  // candidates ran out before the budget was met
};

// worst_confidence: lowest score first (ties by file id, then start),
// skipping candidates that overlap an accepted region. random: the same greedy
// pass over a seeded shuffle of the candidates. Stops as soon as the selected
// duration reaches the budget; regions are never truncated.
Selection select_regions(std::span<const PosteriorTrack> tracks,
                         const SelectionStrategy& strategy,
                         double budget_seconds);

struct Composition {
  std::int64_t nonspeech = 0;
  std::int64_t speech = 0;   // exactly one speaker
  std::int64_t overlap = 0;  // two or more speakers

  std::int64_t total() const { return nonspeech + speech + overlap; }
  double fraction(std::int64_t part) const {
    return total() > 0 ? static_cast<double>(part) / total() : 0.0;
  }
  Composition& operator+=(const Composition& o);
};

Composition frame_composition(const ActivityMatrix& reference);

// Per-frame view of one file used to evaluate arbitrary regions cheaply:
// DER contributions summed over every window that scored the frame, the
// number of active reference speakers, and prefix sums over both.
class FrameTable {
 public:
  FrameTable(const PosteriorTrack& track, const PowersetMapping& mapping,
             const AnnotationSet& reference);

  const std::string& file_id() const { return file_id_; }
  double frame_rate() const { return frame_rate_; }
  std::int64_t num_frames() const { return num_frames_; }
  const DERBreakdown& total() const { return total_; }

  DERBreakdown der(FrameRange range) const;
  Composition composition(FrameRange range) const;

 private:
  std::string file_id_;
  double frame_rate_;
  std::int64_t num_frames_;
  DERBreakdown total_;
  std::vector<DERBreakdown> der_prefix_;  // num_frames + 1
  std::vector<Composition> comp_prefix_;  // num_frames + 1
};

struct BudgetCurvePoint {
  double seconds_selected = 0.0;
  DERBreakdown der;
  Composition composition;
};

struct BudgetCurves {
  std::vector<BudgetCurvePoint> points;  // one per region, cumulative
  BudgetCurvePoint whole_set;            // every frame of every track
};

// Builds FrameTables for every track; see the overload below.
BudgetCurves budget_curves(std::span<const ScoredRegion> regions,
                           const AnnotationSet& reference,
                           std::span<const PosteriorTrack> tracks,
                           const PowersetMapping& mapping);

// Cumulative DER breakdown and reference composition after each region,
// plus the whole-set values. Regions must be pairwise non-overlapping.
BudgetCurves budget_curves(std::span<const ScoredRegion> regions,
                           std::span<const FrameTable> tables);

// JSON lines: {"file_id":..,"start":..,"end":..,"score":..,"rank":..}
void write_selection_jsonl(const Selection& selection, std::ostream& out);
std::vector<ScoredRegion> read_selection_jsonl(std::istream& in,
                                               double frame_rate);

// CSV: seconds,false_alarm,missed,confusion,der,nonspeech,speech,overlap
void write_curve_csv(std::span<const BudgetCurvePoint> points, std::ostream& out);

}  // namespace diacal

#endif  // DIACAL_SELECTION_H_
