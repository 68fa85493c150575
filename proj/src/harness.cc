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

#include "diacal/harness.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "diacal/error.h"
#include "diacal/synth.h"
#include "json.hpp"

namespace diacal {

OracleLabelResult oracle_label(std::span<const Region> regions,
                               const AnnotationSet& withheld) {
  OracleLabelResult out;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& r = regions[i];
    if (!withheld.contains(r.file_id)) {
      throw Error("oracle: region references unknown file '" + r.file_id + "'");
    }
    if (!(r.end > r.start)) {
      throw Error(fmt::format("oracle: empty region [{}, {}) in {}", r.start,
                              r.end, r.file_id));
    }
    for (std::size_t j = 0; j < i; ++j) {
      const Region& o = regions[j];
      if (o.file_id == r.file_id && r.start < o.end && o.start < r.end) {
        throw Error(fmt::format("oracle: overlapping regions in {}", r.file_id));
      }
    }
    out.regions.push_back(r);
    out.total_annotated += r.duration();
    for (const Segment& s : withheld.segments(r.file_id)) {
      const double b = std::max(s.start, r.start);
      const double e = std::min(s.end(), r.end);
      if (e > b) out.annotations.add({s.file_id, s.speaker, b, e - b});
    }
  }
  return out;
}

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kManifestRttm = "annotations.rttm";

}  // namespace

TrainingManifest emit_training_manifest(const OracleLabelResult& result,
                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  TrainingManifest manifest;
  manifest.regions = result.regions;
  std::sort(manifest.regions.begin(), manifest.regions.end(),
            [](const Region& a, const Region& b) {
              return std::tie(a.file_id, a.start) < std::tie(b.file_id, b.start);
            });
  manifest.total_duration = result.total_annotated;
  manifest.rttm = kManifestRttm;

  // Clipped turns in (file, start, speaker) order.
  AnnotationSet sorted;
  for (const auto& [file, segs] : result.annotations.by_file()) {
    std::vector<Segment> v = segs;
    std::sort(v.begin(), v.end(), [](const Segment& a, const Segment& b) {
      return std::tie(a.start, a.speaker, a.duration) <
             std::tie(b.start, b.speaker, b.duration);
    });
    for (Segment& s : v) sorted.add(std::move(s));
  }

  nlohmann::ordered_json j;
  j["version"] = 1;
  j["total_duration"] = manifest.total_duration;
  j["rttm"] = manifest.rttm;
  j["regions"] = nlohmann::ordered_json::array();
  for (const Region& r : manifest.regions) {
    nlohmann::ordered_json jr;
    jr["file_id"] = r.file_id;
    jr["start"] = r.start;
    jr["end"] = r.end;
    j["regions"].push_back(jr);
  }
  {
    std::ofstream out(dir / kManifestName);
    if (!out) throw Error("cannot write " + (dir / kManifestName).string());
    out << j.dump(2) << '\n';
  }
  std::ofstream rttm(dir / kManifestRttm);
  if (!rttm) throw Error("cannot write " + (dir / kManifestRttm).string());
  write_rttm(sorted, rttm);
  if (!rttm) throw Error("write failed for " + (dir / kManifestRttm).string());
  return manifest;
}

TrainingManifest read_training_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open " + manifest.string());
  TrainingManifest out;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != 1) {
      throw Error("unsupported manifest version in " + manifest.string());
    }
    out.total_duration = j.at("total_duration").get<double>();
    out.rttm = j.at("rttm").get<std::string>();
    for (const auto& jr : j.at("regions")) {
      out.regions.push_back({jr.at("file_id").get<std::string>(),
                             jr.at("start").get<double>(),
                             jr.at("end").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(manifest.string() + ": " + e.what());
  }
  return out;
}

CheckpointEvaluator::CheckpointEvaluator(std::span<const Checkpoint> checkpoints,
                                         const AnnotationSet& reference,
                                         const PowersetMapping& mapping) {
  if (checkpoints.empty()) throw Error("checkpoints: empty checkpoint set");
  for (const Checkpoint& c : checkpoints) {
    ids_.push_back(c.id);
    std::map<std::string, FrameTable> tables;
    for (const PosteriorTrack& t : c.tracks) {
      tables.emplace(t.file_id, FrameTable(t, mapping, reference));
    }
    tables_.push_back(std::move(tables));
  }
  // Every checkpoint must see the same files on the same grids.
  const auto& first = tables_.front();
  for (std::size_t i = 1; i < tables_.size(); ++i) {
    bool same = tables_[i].size() == first.size();
    auto b = tables_[i].cbegin();
    for (auto a = first.cbegin();
         same && a != first.cend(); ++a, ++b) {
      same = a->first == b->first && a->second.num_frames() == b->second.num_frames() &&
             a->second.frame_rate() == b->second.frame_rate();
    }
    if (!same) {
      throw Error("checkpoints: '" + ids_[i] + "' does not cover the same "
                  "files and grids as '" + ids_[0] + "'");
    }
  }
  for (const auto& [file, table] : first) {
    domain_seconds_ += table.num_frames() / table.frame_rate();
  }
}

std::size_t CheckpointEvaluator::index_of(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw Error("checkpoints: unknown checkpoint '" + id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

DERBreakdown CheckpointEvaluator::der(std::size_t checkpoint,
                                      std::span<const Region> regions) const {
  DERBreakdown total;
  const auto& tables = tables_.at(checkpoint);
  for (const Region& r : regions) {
    auto it = tables.find(r.file_id);
    if (it == tables.end()) {
      throw Error("checkpoints: region references unknown file '" + r.file_id + "'");
    }
    total += it->second.der(to_frames(r, it->second.frame_rate()));
  }
  return total;
}

DERBreakdown CheckpointEvaluator::full_der(std::size_t checkpoint) const {
  DERBreakdown total;
  for (const auto& [file, table] : tables_.at(checkpoint)) total += table.total();
  return total;
}

namespace {

// Reference speech is identical across checkpoints for a fixed set of
// frames, so ranking by error count ranks by DER.
std::size_t argmin_errors(const std::vector<std::string>& ids,
                          const std::vector<DERBreakdown>& ders) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < ders.size(); ++i) {
    const auto a = ders[i].errors();
    const auto b = ders[best].errors();
    if (a < b || (a == b && ids[i] < ids[best])) best = i;
  }
  return best;
}

double rate(const DERBreakdown& d) {
  const auto der = d.der();
  return der ? *der : 0.0;
}

}  // namespace

std::size_t CheckpointEvaluator::select(std::span<const Region> regions) const {
  if (regions.empty()) throw Error("checkpoints: empty validation region list");
  std::vector<DERBreakdown> ders;
  for (std::size_t i = 0; i < size(); ++i) ders.push_back(der(i, regions));
  return argmin_errors(ids_, ders);
}

std::size_t CheckpointEvaluator::best() const {
  std::vector<DERBreakdown> ders;
  for (std::size_t i = 0; i < size(); ++i) ders.push_back(full_der(i));
  return argmin_errors(ids_, ders);
}

std::string select_checkpoint(std::span<const Checkpoint> checkpoints,
                              const AnnotationSet& reference,
                              std::span<const Region> regions,
                              const PowersetMapping& mapping) {
  if (regions.empty()) throw Error("checkpoints: empty validation region list");
  CheckpointEvaluator eval(checkpoints, reference, mapping);
  return eval.ids()[eval.select(regions)];
}

ValidationEvalReport evaluate_minimal_validation(
    std::span<const Checkpoint> checkpoints, const AnnotationSet& reference,
    const PowersetMapping& mapping, const ValidationConfig& config) {
  CheckpointEvaluator eval(checkpoints, reference, mapping);
  return evaluate_minimal_validation(checkpoints, eval, config);
}

ValidationEvalReport evaluate_minimal_validation(
    std::span<const Checkpoint> checkpoints,
    const CheckpointEvaluator& evaluator, const ValidationConfig& config) {
  if (config.n_trials < 1) throw Error("validation: n_trials must be >= 1");
  const std::size_t base = evaluator.index_of(config.base_checkpoint);
  const std::vector<PosteriorTrack>& base_tracks = checkpoints[base].tracks;

  std::vector<Region> whole_domain;
  for (const PosteriorTrack& t : base_tracks) {
    whole_domain.push_back({t.file_id, 0.0, t.grid.num_frames / t.grid.frame_rate});
  }

  ValidationEvalReport report;
  const std::size_t best = evaluator.best();
  report.best = evaluator.ids()[best];
  const double der_best = rate(evaluator.full_der(best));
  const double domain = evaluator.domain_seconds();

  for (double budget : config.budgets) {
    for (StrategyKind kind : config.strategies) {
      const int trials = kind == StrategyKind::kRandom ? config.n_trials : 1;
      ValidationSummary summary{budget, kind, 0.0, 0.0, false};
      for (int trial = 0; trial < trials; ++trial) {
        std::vector<Region> regions;
        bool shortfall = false;
        if (budget >= domain - 1e-6) {
          regions = whole_domain;
          shortfall = budget > domain + 1e-6;
        } else {
          SelectionStrategy strategy{kind, derive_seed(config.seed, trial),
                                     config.region_length, config.stride};
          const Selection sel = select_regions(base_tracks, strategy, budget);
          shortfall = sel.shortfall;
          for (const ScoredRegion& r : sel.regions) regions.push_back(r.region);
        }
        ValidationRow row;
        row.budget = budget;
        row.strategy = kind;
        row.trial = trial;
        row.shortfall = shortfall;
        const std::size_t chosen = evaluator.select(regions);
        row.selected = evaluator.ids()[chosen];
        row.der_selected = rate(evaluator.full_der(chosen));
        row.der_best = der_best;
        if (der_best > 0.0) {
          row.rel_diff = (row.der_selected - der_best) / der_best;
        } else {
          row.rel_diff = row.der_selected > 0.0
                             ? std::numeric_limits<double>::infinity()
                             : 0.0;
        }
        summary.mean_rel_diff += row.rel_diff / trials;
        summary.max_rel_diff = std::max(summary.max_rel_diff, row.rel_diff);
        summary.shortfall = summary.shortfall || shortfall;
        report.rows.push_back(std::move(row));
      }
      report.summaries.push_back(summary);
    }
  }
  return report;
}

void write_validation_csv(const ValidationEvalReport& report, std::ostream& out) {
  out << "budget_s,strategy,trial,selected_ckpt,der_selected,der_best,rel_diff\n";
  for (const ValidationRow& r : report.rows) {
    out << fmt::format("{:.3f},{},{},{},{:.6f},{:.6f},{:.6f}\n", r.budget,
                       to_string(r.strategy), r.trial, r.selected,
                       r.der_selected, r.der_best, r.rel_diff);
  }
}

void write_validation_summary_csv(const ValidationEvalReport& report,
                                  std::ostream& out) {
  out << "budget_s,strategy,mean_rel_diff,max_rel_diff,shortfall\n";
  for (const ValidationSummary& s : report.summaries) {
    out << fmt::format("{:.3f},{},{:.6f},{:.6f},{}\n", s.budget,
                       to_string(s.strategy), s.mean_rel_diff, s.max_rel_diff,
                       s.shortfall ? 1 : 0);
  }
}

}  // namespace diacal
