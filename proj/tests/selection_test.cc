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

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "diacal/error.h"
#include "diacal/selection.h"
#include "diacal/synth.h"
#include "doctest.h"

using namespace diacal;

namespace {

const PowersetMapping kMapping{PowersetConfig(3, 2)};

// Seven-class track whose top probability at time t (seconds) is conf(t).
PosteriorTrack shaped_track(const std::string& id, double seconds,
                            const std::function<double(double)>& conf) {
  PosteriorTrack t;
  t.file_id = id;
  t.grid = {kDefaultFrameRate, seconds_to_frames(seconds, kDefaultFrameRate)};
  t.num_classes = 7;
  for (std::int64_t f = 0; f < t.grid.num_frames; ++f) {
    const double c = conf(t.grid.frame_start(f));
    t.probs.push_back(static_cast<float>(c));
    for (int j = 1; j < 7; ++j) t.probs.push_back(static_cast<float>((1.0 - c) / 6));
  }
  return t;
}

bool disjoint(const std::vector<ScoredRegion>& regions) {
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      const auto& a = regions[i];
      const auto& b = regions[j];
      if (a.region.file_id == b.region.file_id && a.frames.begin < b.frames.end &&
          b.frames.begin < a.frames.end) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("candidate regions") {
  SUBCASE("20 s file, 7.5 s regions every 2.5 s") {
    const auto c = score_candidate_regions(shaped_track("f", 20.0, [](double) { return 0.8; }),
                                           7.5, 2.5);
    REQUIRE(c.size() == 6);
    for (const ScoredRegion& r : c) {
      CHECK(r.score == doctest::Approx(0.8));
      CHECK(r.frames.end - r.frames.begin == 250);
    }
    CHECK(c[0].region.start == 0.0);
    CHECK(c[1].frames.begin == 83);
    CHECK(c[5].frames.begin == 416);
  }
  SUBCASE("half the frames at each confidence") {
    const auto c = score_candidate_regions(
        shaped_track("f", 7.5, [](double t) { return t < 3.75 ? 0.4 : 0.8; }), 7.5, 2.5);
    REQUIRE(c.size() == 1);
    CHECK(c[0].score == doctest::Approx(0.6).epsilon(0.01));
  }
  SUBCASE("a file shorter than a region has none") {
    CHECK(score_candidate_regions(shaped_track("f", 5.0, [](double) { return 0.8; }), 7.5, 2.5)
              .empty());
  }
}

TEST_CASE("worst-confidence selection") {
  SUBCASE("budget of one region picks the global minimum") {
    std::vector<PosteriorTrack> tracks = {
        shaped_track("a", 60.0, [](double t) { return t > 20 && t < 30 ? 0.5 : 0.9; }),
        shaped_track("b", 60.0, [](double t) { return t > 40 && t < 50 ? 0.3 : 0.9; })};
    const Selection s = select_regions(tracks, {}, 7.5);
    REQUIRE(s.regions.size() == 1);
    CHECK(s.regions[0].region.file_id == "b");
    CHECK(s.regions[0].region.start >= 40.0 - 1e-9);
    CHECK(s.regions[0].region.end <= 50.0 + 0.1);
    CHECK_FALSE(s.shortfall);
  }
  SUBCASE("ties go to the smaller file id, then the earlier start") {
    std::vector<PosteriorTrack> tracks = {
        shaped_track("b", 30.0, [](double) { return 0.7; }),
        shaped_track("a", 30.0, [](double) { return 0.7; })};
    const Selection s = select_regions(tracks, {}, 7.5);
    REQUIRE(s.regions.size() == 1);
    CHECK(s.regions[0].region.file_id == "a");
    CHECK(s.regions[0].frames.begin == 0);
  }
  SUBCASE("a low-confidence dip is selected first") {
    std::vector<PosteriorTrack> tracks = {
        shaped_track("f", 300.0, [](double t) { return t >= 40 && t < 50 ? 0.3 : 0.9; })};
    const Selection s = select_regions(tracks, {}, 60.0);
    REQUIRE(!s.regions.empty());
    CHECK(s.regions[0].region.start >= 40.0 - 1e-9);
    CHECK(s.regions[0].region.end <= 50.0 + 1e-9);
  }
  SUBCASE("regions never overlap and scores do not decrease") {
    ConversationParams p;
    p.duration = 200.0;
    std::vector<PosteriorTrack> tracks;
    for (int i = 0; i < 3; ++i) {
      p.file_id = "rec" + std::to_string(i);
      p.seed = i;
      const AnnotationSet ref = gen_reference(p);
      tracks.push_back(gen_posteriors(ref, p.file_id, kMapping, {},
                                      {p.frame_rate, seconds_to_frames(200.0, p.frame_rate)},
                                      {}, i + 10));
    }
    for (double budget : {7.5, 60.0, 300.0, 10000.0}) {
      const Selection s = select_regions(tracks, {}, budget);
      CHECK(disjoint(s.regions));
      for (std::size_t i = 1; i < s.regions.size(); ++i) {
        CHECK(s.regions[i - 1].score <= s.regions[i].score);
      }
      double total = 0.0;
      for (const auto& r : s.regions) total += r.region.duration();
      CHECK(total == doctest::Approx(s.total_seconds));
      CHECK(s.shortfall == (budget == 10000.0));
      if (!s.shortfall) CHECK(s.total_seconds >= budget - 1e-6);
    }
  }
  CHECK_THROWS_AS(select_regions(std::vector<PosteriorTrack>{}, {}, 0.0), Error);
}

TEST_CASE("random selection") {
  std::vector<PosteriorTrack> tracks = {
      shaped_track("a", 120.0, [](double t) { return 0.5 + 0.4 * std::abs(std::sin(t)); }),
      shaped_track("b", 120.0, [](double t) { return 0.5 + 0.4 * std::abs(std::cos(t)); })};
  SelectionStrategy s;
  s.kind = StrategyKind::kRandom;
  s.seed = 42;
  const Selection a = select_regions(tracks, s, 60.0);
  const Selection b = select_regions(tracks, s, 60.0);
  REQUIRE(a.regions.size() == b.regions.size());
  for (std::size_t i = 0; i < a.regions.size(); ++i) {
    CHECK(a.regions[i].region == b.regions[i].region);
  }
  CHECK(disjoint(a.regions));
  // Track order does not matter.
  std::vector<PosteriorTrack> swapped = {tracks[1], tracks[0]};
  const Selection c = select_regions(swapped, s, 60.0);
  REQUIRE(c.regions.size() == a.regions.size());
  for (std::size_t i = 0; i < a.regions.size(); ++i) {
    CHECK(a.regions[i].region == c.regions[i].region);
  }
  s.seed = 43;
  const Selection d = select_regions(tracks, s, 60.0);
  bool differs = d.regions.size() != a.regions.size();
  for (std::size_t i = 0; !differs && i < a.regions.size(); ++i) {
    differs = !(a.regions[i].region == d.regions[i].region);
  }
  CHECK(differs);
  CHECK(parse_strategy("worst_confidence") == StrategyKind::kWorstConfidence);
  CHECK(parse_strategy("worst-confidence") == StrategyKind::kWorstConfidence);
  CHECK(parse_strategy("random") == StrategyKind::kRandom);
  CHECK_THROWS_AS(parse_strategy("best"), Error);
}

TEST_CASE("frame composition") {
  ActivityMatrix m(4, 2);
  m.set(1, 0, 1);
  m.set(2, 0, 1);
  m.set(2, 1, 1);
  m.set(3, 1, 1);
  const Composition c = frame_composition(m);
  CHECK(c.nonspeech == 1);
  CHECK(c.speech == 2);
  CHECK(c.overlap == 1);
  CHECK(c.fraction(c.speech) == 0.5);
  CHECK(Composition{}.fraction(0) == 0.0);
}

TEST_CASE("budget curves") {
  ConversationParams p;
  p.duration = 30.0;
  p.turn_on_rate = 0.4;
  const AnnotationSet ref = gen_reference(p);
  const FrameGrid grid{p.frame_rate, seconds_to_frames(30.0, p.frame_rate)};
  std::vector<PosteriorTrack> tracks = {
      gen_posteriors(ref, p.file_id, kMapping, {}, grid, {7.5, 7.5}, 3)};
  SelectionStrategy strategy;
  strategy.stride = 7.5;  // candidates tile the file exactly
  const Selection s = select_regions(tracks, strategy, 1000.0);
  REQUIRE(s.regions.size() == 4);
  const BudgetCurves curves = budget_curves(s.regions, ref, tracks, kMapping);
  REQUIRE(curves.points.size() == 4);

  SUBCASE("the last point covers every frame and equals local DER") {
    const LocalDerResult full = local_der(tracks[0], kMapping, ref);
    CHECK(curves.points.back().der == full.total);
    CHECK(curves.whole_set.der == full.total);
    CHECK(curves.points.back().composition.total() == grid.num_frames);
    CHECK(curves.points.back().seconds_selected == doctest::Approx(30.0));
  }
  SUBCASE("points accumulate") {
    for (std::size_t i = 1; i < curves.points.size(); ++i) {
      CHECK(curves.points[i].seconds_selected > curves.points[i - 1].seconds_selected);
      CHECK(curves.points[i].der.total_speech >= curves.points[i - 1].der.total_speech);
      const Composition& c = curves.points[i].composition;
      CHECK(c.fraction(c.nonspeech) + c.fraction(c.speech) + c.fraction(c.overlap) ==
            doctest::Approx(1.0));
    }
  }
  SUBCASE("CSV output") {
    std::ostringstream out;
    write_curve_csv(curves.points, out);
    const std::string text = out.str();
    CHECK(text.rfind("seconds,false_alarm,missed,confusion,der,nonspeech,speech,overlap\n", 0) ==
          0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  }
  SUBCASE("an unknown file is an error") {
    std::vector<ScoredRegion> bad(1);
    bad[0].region = {"nope", 0.0, 7.5};
    CHECK_THROWS_AS(budget_curves(bad, ref, tracks, kMapping), Error);
  }
}

TEST_CASE("FrameTable sums match per-window scoring") {
  ConversationParams p;
  p.duration = 60.0;
  const AnnotationSet ref = gen_reference(p);
  const FrameGrid grid{p.frame_rate, seconds_to_frames(60.0, p.frame_rate)};
  const PosteriorTrack t = gen_posteriors(ref, p.file_id, kMapping, {}, grid, {5.0, 2.5}, 9);
  const FrameTable table(t, kMapping, ref);
  const LocalDerResult full = local_der(t, kMapping, ref);
  CHECK(table.der({0, grid.num_frames}) == full.total);
  // Split anywhere: the two halves add up.
  for (std::int64_t cut : {0L, 1L, 500L, 1999L}) {
    CHECK(table.der({0, cut}) + table.der({cut, grid.num_frames}) == full.total);
  }
}

TEST_CASE("selection JSONL round trip") {
  std::vector<PosteriorTrack> tracks = {
      shaped_track("a", 60.0, [](double t) { return 0.3 + 0.6 * t / 60.0; })};
  const Selection s = select_regions(tracks, {}, 30.0);
  std::ostringstream out;
  write_selection_jsonl(s, out);
  std::istringstream in(out.str());
  const auto back = read_selection_jsonl(in, kDefaultFrameRate);
  REQUIRE(back.size() == s.regions.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].region == s.regions[i].region);
    CHECK(back[i].frames.begin == s.regions[i].frames.begin);
    CHECK(back[i].frames.end == s.regions[i].frames.end);
  }
  std::istringstream bad("{\"file_id\":\"a\"}\n");
  CHECK_THROWS_AS(read_selection_jsonl(bad, kDefaultFrameRate), ParseError);
}
