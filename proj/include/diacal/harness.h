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

#ifndef DIACAL_HARNESS_H_
#define DIACAL_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "diacal/annotations.h"
#include "diacal/label_space.h"
#include "diacal/posteriors.h"
#include "diacal/selection.h"

namespace diacal {

// Annotations revealed by the simulated annotator.
struct OracleLabelResult {
  std::vector<Region> regions;
  AnnotationSet annotations;  // reference turns clipped to the regions
  double total_annotated = 0.0;
};

// Intersects every withheld turn with every region, splitting turns at region
// boundaries and dropping what falls outside. Throws when a region names a
// file the withheld set does not know, or when two regions of a file overlap.
OracleLabelResult oracle_label(std::span<const Region> regions,
                               const AnnotationSet& withheld);

struct TrainingManifest {
  std::vector<Region> regions;  // sorted by (file_id, start)
  double total_duration = 0.0;
  std::string rttm;  // file name, relative to the manifest directory
};

// Writes `manifest.json` and `annotations.rttm` into `dir` (created if
// needed). Returns the manifest that was written.
TrainingManifest emit_training_manifest(const OracleLabelResult& result,
                                        const std::filesystem::path& dir);
TrainingManifest read_training_manifest(const std::filesystem::path& manifest);

// Posteriors of one model snapshot over the validation domain.
struct Checkpoint {
  std::string id;
  std::vector<PosteriorTrack> tracks;
};

// Per-frame DER tables of every checkpoint. All checkpoints must cover the
// same files on the same grids.
class CheckpointEvaluator {
 public:
  CheckpointEvaluator(std::span<const Checkpoint> checkpoints,
                      const AnnotationSet& reference,
                      const PowersetMapping& mapping);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t index_of(const std::string& id) const;

  DERBreakdown der(std::size_t checkpoint, std::span<const Region> regions) const;
  DERBreakdown full_der(std::size_t checkpoint) const;

  // Checkpoint with the lowest DER on the regions; ties go to the smallest id.
  std::size_t select(std::span<const Region> regions) const;
  std::size_t best() const;

  double domain_seconds() const { return domain_seconds_; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::map<std::string, FrameTable>> tables_;
  double domain_seconds_ = 0.0;
};

// Throws on an empty region list.
std::string select_checkpoint(std::span<const Checkpoint> checkpoints,
                              const AnnotationSet& reference,
                              std::span<const Region> regions,
                              const PowersetMapping& mapping);

struct ValidationConfig {
  std::vector<double> budgets;  // seconds
  std::vector<StrategyKind> strategies = {StrategyKind::kWorstConfidence,
                                          StrategyKind::kRandom};
  int n_trials = 20;  // random only; worst-confidence runs once
  std::string base_checkpoint;
  double region_length = 7.5;
  double stride = 2.5;
  std::uint64_t seed = 0;
};

struct ValidationRow {
  double budget = 0.0;
  StrategyKind strategy = StrategyKind::kWorstConfidence;
  int trial = 0;
  std::string selected;
  double der_selected = 0.0;
  double der_best = 0.0;
  double rel_diff = 0.0;  // (der_selected - der_best) / der_best
  bool shortfall = false;
};

struct ValidationSummary {
  double budget = 0.0;
  StrategyKind strategy = StrategyKind::kWorstConfidence;
  double mean_rel_diff = 0.0;
  double max_rel_diff = 0.0;
  bool shortfall = false;
};

struct ValidationEvalReport {
  std::string best;
  std::vector<ValidationRow> rows;
  std::vector<ValidationSummary> summaries;  // budget-major, config order
};

// For every budget and strategy, selects validation regions by scoring the
// base checkpoint's confidence, picks the checkpoint with the lowest DER on
// them and reports how far its full-set DER is from the best one. A budget
// that covers the whole domain validates on every frame.
ValidationEvalReport evaluate_minimal_validation(
    std::span<const Checkpoint> checkpoints, const AnnotationSet& reference,
    const PowersetMapping& mapping, const ValidationConfig& config);

ValidationEvalReport evaluate_minimal_validation(
    std::span<const Checkpoint> checkpoints,
    const CheckpointEvaluator& evaluator, const ValidationConfig& config);

// CSV: budget_s,strategy,trial,selected_ckpt,der_selected,der_best,rel_diff
void write_validation_csv(const ValidationEvalReport& report, std::ostream& out);
// CSV: budget_s,strategy,mean_rel_diff,max_rel_diff,shortfall
void write_validation_summary_csv(const ValidationEvalReport& report,
                                  std::ostream& out);

}  // namespace diacal

#endif  // DIACAL_HARNESS_H_
