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

#include "diacal/annotations.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "diacal/error.h"

namespace diacal {

void AnnotationSet::add(Segment segment) {
  by_file_[segment.file_id].push_back(std::move(segment));
}

bool AnnotationSet::contains(const std::string& file_id) const {
  return by_file_.count(file_id) != 0;
}

std::size_t AnnotationSet::num_segments() const {
  std::size_t n = 0;
  for (const auto& [file, segs] : by_file_) n += segs.size();
  return n;
}

std::span<const Segment> AnnotationSet::segments(
    const std::string& file_id) const {
  auto it = by_file_.find(file_id);
  if (it == by_file_.end()) return {};
  return it->second;
}

std::vector<std::string> AnnotationSet::files() const {
  std::vector<std::string> out;
  out.reserve(by_file_.size());
  for (const auto& [file, segs] : by_file_) out.push_back(file);
  return out;
}

namespace {

bool parse_double(const std::string& text, double* value) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, *value);
  return ec == std::errc() && ptr == last && std::isfinite(*value);
}

}  // namespace

AnnotationSet parse_rttm(std::istream& in) {
  AnnotationSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields_in(line);
    std::vector<std::string> fields;
    for (std::string f; fields_in >> f;) fields.push_back(std::move(f));
    if (fields.empty() || fields[0][0] == ';' || fields[0] != "SPEAKER") {
      continue;
    }
    if (fields.size() != 10) {
      throw ParseError(line_no, fmt::format("SPEAKER line has {} fields, "
                                            "expected 10",
                                            fields.size()));
    }
    Segment seg;
    seg.file_id = fields[1];
    seg.speaker = fields[7];
    if (!parse_double(fields[3], &seg.start)) {
      throw ParseError(line_no, "non-numeric start time '" + fields[3] + "'");
    }
    if (!parse_double(fields[4], &seg.duration)) {
      throw ParseError(line_no, "non-numeric duration '" + fields[4] + "'");
    }
    if (seg.duration <= 0.0) {
      throw ParseError(line_no, "non-positive duration " + fields[4]);
    }
    out.add(std::move(seg));
  }
  return out;
}

AnnotationSet read_rttm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open RTTM file " + path);
  try {
    return parse_rttm(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void write_rttm(const AnnotationSet& annotations, std::ostream& out) {
  for (const auto& [file, segs] : annotations.by_file()) {
    for (const Segment& s : segs) {
      out << fmt::format("SPEAKER {} 1 {:.3f} {:.3f} <NA> <NA> {} <NA> <NA>\n",
                         file, s.start, s.duration, s.speaker);
    }
  }
}

std::int64_t seconds_to_frames(double seconds, double frame_rate) {
  return static_cast<std::int64_t>(std::floor(seconds * frame_rate + 1e-6));
}

int ActivityMatrix::active_count(std::size_t t) const {
  int n = 0;
  for (std::uint8_t v : row(t)) n += v != 0;
  return n;
}

namespace {

struct Interval {
  double begin;
  double end;
};

std::vector<Interval> merge_intervals(std::vector<Interval> spans) {
  std::sort(spans.begin(), spans.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::vector<Interval> merged;
  for (const Interval& s : spans) {
    if (!merged.empty() && s.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

}  // namespace

WindowReference rasterize(std::span<const Segment> segments, double frame_rate,
                          std::int64_t begin_frame, std::int64_t end_frame) {
  if (begin_frame < 0 || end_frame < begin_frame) {
    throw Error(fmt::format("rasterize: invalid frame range [{}, {})",
                            begin_frame, end_frame));
  }
  const double win_begin = begin_frame / frame_rate;
  const double win_end = end_frame / frame_rate;

  std::map<std::string, std::vector<Interval>> by_speaker;
  for (const Segment& s : segments) {
    if (s.end() <= win_begin || s.start >= win_end) continue;
    by_speaker[s.speaker].push_back({s.start, s.end()});
  }

  struct SpeakerSpeech {
    std::string name;
    std::vector<Interval> turns;
    double in_window = 0.0;
  };
  std::vector<SpeakerSpeech> speakers;
  for (auto& [name, spans] : by_speaker) {
    SpeakerSpeech sp{name, merge_intervals(std::move(spans)), 0.0};
    for (const Interval& iv : sp.turns) {
      sp.in_window += std::max(
          0.0, std::min(iv.end, win_end) - std::max(iv.begin, win_begin));
    }
    if (sp.in_window > 0.0) speakers.push_back(std::move(sp));
  }
  std::stable_sort(speakers.begin(), speakers.end(),
                   [](const SpeakerSpeech& a, const SpeakerSpeech& b) {
                     return a.in_window > b.in_window;
                   });

  const auto num_frames = static_cast<std::size_t>(end_frame - begin_frame);
  WindowReference out{ActivityMatrix(num_frames, speakers.size()), {}};
  std::vector<double> covered(num_frames);
  for (std::size_t s = 0; s < speakers.size(); ++s) {
    out.speakers.push_back(speakers[s].name);
    std::fill(covered.begin(), covered.end(), 0.0);
    for (const Interval& iv : speakers[s].turns) {
      // Coverage in frame units, clipped to the window.
      const double b = std::max(iv.begin * frame_rate, double(begin_frame));
      const double e = std::min(iv.end * frame_rate, double(end_frame));
      if (e <= b) continue;
      auto t0 = static_cast<std::int64_t>(std::floor(b));
      auto t1 = static_cast<std::int64_t>(std::ceil(e));
      for (std::int64_t t = t0; t < t1; ++t) {
        const double ov = std::min(e, double(t + 1)) - std::max(b, double(t));
        if (ov > 0.0) covered[t - begin_frame] += ov;
      }
    }
    for (std::size_t t = 0; t < num_frames; ++t) {
      if (covered[t] >= 0.5 - 1e-9) out.activity.set(t, s, 1);
    }
  }
  return out;
}

WindowReference rasterize(std::span<const Segment> segments,
                          const FrameGrid& grid, double start_s, double end_s) {
  const std::int64_t b = std::llround(start_s * grid.frame_rate);
  const std::int64_t e = std::llround(end_s * grid.frame_rate);
  if (b < 0 || e > grid.num_frames || e < b) {
    throw Error(fmt::format("rasterize: window [{}, {}) s outside file of {} "
                            "frames",
                            start_s, end_s, grid.num_frames));
  }
  return rasterize(segments, grid.frame_rate, b, e);
}

}  // namespace diacal
