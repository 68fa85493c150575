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

#include "diacal/selection.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include <fmt/format.h>
#include "json.hpp"

#include "diacal/error.h"

namespace diacal {

namespace {

// Slack on budget comparisons; region durations come from frame counts.
constexpr double kBudgetEpsilon = 1e-6;

}  // namespace

FrameRange to_frames(const Region& region, double frame_rate) {
  return {std::llround(region.start * frame_rate),
          std::llround(region.end * frame_rate)};
}

const char* to_string(StrategyKind kind) {
  return kind == StrategyKind::kRandom ? "random" : "worst-confidence";
}

StrategyKind parse_strategy(const std::string& name) {
  if (name == "random") return StrategyKind::kRandom;
  if (name == "worst-confidence" || name == "worst_confidence") {
    return StrategyKind::kWorstConfidence;
  }
  throw Error("unknown selection strategy '" + name + "'");
}

std::vector<ScoredRegion> score_candidate_regions(const PosteriorTrack& track,
                                                  double region_length,
                                                  double stride) {
  const double fr = track.grid.frame_rate;
  const std::int64_t len = seconds_to_frames(region_length, fr);
  const std::int64_t step = seconds_to_frames(stride, fr);
  if (len < 1 || step < 1) {
    throw Error(fmt::format("candidates: region length {} s and stride {} s "
                            "must each span at least one frame",
                            region_length, stride));
  }
  const std::int64_t n = track.grid.num_frames;
  // Prefix sums of per-frame confidence.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::int64_t t = 0; t < n; ++t) {
    prefix[t + 1] = prefix[t] + top_label(track.row(t)).confidence;
  }
  std::vector<ScoredRegion> out;
  for (std::int64_t k = 0;; ++k) {
    // Starts are snapped per candidate so they do not drift with the stride.
    const std::int64_t begin = seconds_to_frames(k * stride, fr);
    const std::int64_t end = begin + len;
    if (end > n) break;
    ScoredRegion c;
    c.frames = {begin, end};
    c.region = {track.file_id, begin / fr, end / fr};
    c.score = (prefix[end] - prefix[begin]) / static_cast<double>(len);
    out.push_back(std::move(c));
  }
  return out;
}

Selection select_regions(std::span<const PosteriorTrack> tracks,
                         const SelectionStrategy& strategy,
                         double budget_seconds) {
  if (!(budget_seconds > 0.0)) throw Error("selection: budget must be positive");
  std::vector<ScoredRegion> candidates;
  for (const PosteriorTrack& track : tracks) {
    auto c = score_candidate_regions(track, strategy.region_length,
                                     strategy.stride);
    candidates.insert(candidates.end(), std::make_move_iterator(c.begin()),
                      std::make_move_iterator(c.end()));
  }
  // Canonical order first so the random shuffle does not depend on the order
  // tracks were passed in.
  std::sort(candidates.begin(), candidates.end(),
            [](const ScoredRegion& a, const ScoredRegion& b) {
              return std::tie(a.region.file_id, a.frames.begin) <
                     std::tie(b.region.file_id, b.frames.begin);
            });
  if (strategy.kind == StrategyKind::kWorstConfidence) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const ScoredRegion& a, const ScoredRegion& b) {
                       return a.score < b.score;
                     });
  } else {
    std::mt19937_64 rng(strategy.seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
  }

  Selection sel;
  std::map<std::string, std::vector<FrameRange>> taken;
  for (ScoredRegion& c : candidates) {
    if (sel.total_seconds >= budget_seconds - kBudgetEpsilon) break;
    auto& ranges = taken[c.region.file_id];
    const bool overlaps = std::any_of(ranges.begin(), ranges.end(), [&](const FrameRange& r) {
      return c.frames.begin < r.end && r.begin < c.frames.end;
    });
    if (overlaps) continue;
    ranges.push_back(c.frames);
    sel.total_seconds += c.region.duration();
    sel.regions.push_back(std::move(c));
  }
  sel.shortfall = sel.total_seconds < budget_seconds - kBudgetEpsilon;
  return sel;
}

Composition& Composition::operator+=(const Composition& o) {
  nonspeech += o.nonspeech;
  speech += o.speech;
  overlap += o.overlap;
  return *this;
}

Composition frame_composition(const ActivityMatrix& reference) {
  Composition c;
  for (std::size_t t = 0; t < reference.num_frames(); ++t) {
    const int n = reference.active_count(t);
    if (n == 0) {
      ++c.nonspeech;
    } else if (n == 1) {
      ++c.speech;
    } else {
      ++c.overlap;
    }
  }
  return c;
}

FrameTable::FrameTable(const PosteriorTrack& track,
                       const PowersetMapping& mapping,
                       const AnnotationSet& reference)
    : file_id_(track.file_id),
      frame_rate_(track.grid.frame_rate),
      num_frames_(track.grid.num_frames) {
  const LocalDerResult result = local_der(track, mapping, reference);
  total_ = result.total;
  std::vector<DERBreakdown> per_frame(num_frames_);
  for (const WindowFrame& f : result.frames) per_frame[f.frame] += f.counts;

  const WindowReference whole = rasterize(reference.segments(file_id_),
                                          frame_rate_, 0, num_frames_);
  der_prefix_.resize(num_frames_ + 1);
  comp_prefix_.resize(num_frames_ + 1);
  for (std::int64_t t = 0; t < num_frames_; ++t) {
    der_prefix_[t + 1] = der_prefix_[t] + per_frame[t];
    Composition c = comp_prefix_[t];
    const int n = whole.activity.active_count(t);
    if (n == 0) {
      ++c.nonspeech;
    } else if (n == 1) {
      ++c.speech;
    } else {
      ++c.overlap;
    }
    comp_prefix_[t + 1] = c;
  }
}

DERBreakdown FrameTable::der(FrameRange range) const {
  const std::int64_t b = std::clamp<std::int64_t>(range.begin, 0, num_frames_);
  const std::int64_t e = std::clamp<std::int64_t>(range.end, b, num_frames_);
  const DERBreakdown& hi = der_prefix_[e];
  const DERBreakdown& lo = der_prefix_[b];
  return {hi.false_alarm - lo.false_alarm, hi.missed - lo.missed,
          hi.confusion - lo.confusion, hi.total_speech - lo.total_speech};
}

Composition FrameTable::composition(FrameRange range) const {
  const std::int64_t b = std::clamp<std::int64_t>(range.begin, 0, num_frames_);
  const std::int64_t e = std::clamp<std::int64_t>(range.end, b, num_frames_);
  const Composition& hi = comp_prefix_[e];
  const Composition& lo = comp_prefix_[b];
  return {hi.nonspeech - lo.nonspeech, hi.speech - lo.speech,
          hi.overlap - lo.overlap};
}

BudgetCurves budget_curves(std::span<const ScoredRegion> regions,
                           const AnnotationSet& reference,
                           std::span<const PosteriorTrack> tracks,
                           const PowersetMapping& mapping) {
  std::vector<FrameTable> tables;
  tables.reserve(tracks.size());
  for (const PosteriorTrack& t : tracks) tables.emplace_back(t, mapping, reference);
  return budget_curves(regions, tables);
}

BudgetCurves budget_curves(std::span<const ScoredRegion> regions,
                           std::span<const FrameTable> tables) {
  std::map<std::string, const FrameTable*> by_file;
  BudgetCurves curves;
  for (const FrameTable& t : tables) {
    by_file[t.file_id()] = &t;
    const FrameRange all{0, t.num_frames()};
    curves.whole_set.der += t.der(all);
    curves.whole_set.composition += t.composition(all);
    curves.whole_set.seconds_selected += t.num_frames() / t.frame_rate();
  }
  BudgetCurvePoint running;
  for (const ScoredRegion& r : regions) {
    auto it = by_file.find(r.region.file_id);
    if (it == by_file.end()) {
      throw Error("budget curves: region references unknown file '" +
                  r.region.file_id + "'");
    }
    const FrameRange frames = to_frames(r.region, it->second->frame_rate());
    running.seconds_selected += r.region.duration();
    running.der += it->second->der(frames);
    running.composition += it->second->composition(frames);
    curves.points.push_back(running);
  }
  return curves;
}

void write_selection_jsonl(const Selection& selection, std::ostream& out) {
  int rank = 0;
  for (const ScoredRegion& r : selection.regions) {
    nlohmann::ordered_json j;
    j["file_id"] = r.region.file_id;
    j["start"] = r.region.start;
    j["end"] = r.region.end;
    j["score"] = r.score;
    j["rank"] = rank++;
    out << j.dump() << '\n';
  }
}

std::vector<ScoredRegion> read_selection_jsonl(std::istream& in,
                                               double frame_rate) {
  std::vector<ScoredRegion> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScoredRegion r;
      r.region.file_id = j.at("file_id").get<std::string>();
      r.region.start = j.at("start").get<double>();
      r.region.end = j.at("end").get<double>();
      r.score = j.value("score", 0.0);
      r.frames = to_frames(r.region, frame_rate);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

void write_curve_csv(std::span<const BudgetCurvePoint> points,
                     std::ostream& out) {
  out << "seconds,false_alarm,missed,confusion,der,nonspeech,speech,overlap\n";
  for (const BudgetCurvePoint& p : points) {
    const auto der = p.der.der();
    out << fmt::format("{:.3f},{},{},{},{},{:.6f},{:.6f},{:.6f}\n",
                       p.seconds_selected, p.der.false_alarm, p.der.missed,
                       p.der.confusion,
                       der ? fmt::format("{:.6f}", *der) : std::string(),
                       p.composition.fraction(p.composition.nonspeech),
                       p.composition.fraction(p.composition.speech),
                       p.composition.fraction(p.composition.overlap));
  }
}

}  // namespace diacal
