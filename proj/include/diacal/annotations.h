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

#ifndef DIACAL_ANNOTATIONS_H_
#define DIACAL_ANNOTATIONS_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace diacal {

// Default frame rate of the segmentation outputs: 30 ms frames.
inline constexpr double kDefaultFrameRate = 100.0 / 3.0;

// One reference speech turn.
struct Segment {
  std::string file_id;
  std::string speaker;
  double start = 0.0;     // seconds
  double duration = 0.0;  // seconds, > 0

  double end() const { return start + duration; }
  bool operator==(const Segment&) const = default;
};

// Reference speech turns grouped by file. Turns of one file may overlap.
class AnnotationSet {
 public:
  void add(Segment segment);

  bool empty() const { return by_file_.empty(); }
  bool contains(const std::string& file_id) const;
  std::size_t num_segments() const;

  // Turns of one file in insertion order; empty when the file is unknown.
  std::span<const Segment> segments(const std::string& file_id) const;
  // File ids, sorted.
  std::vector<std::string> files() const;

  const std::map<std::string, std::vector<Segment>>& by_file() const {
    return by_file_;
  }

 private:
  std::map<std::string, std::vector<Segment>> by_file_;
};

// Reads SPEAKER lines of an RTTM stream. Other record types, blank lines and
// ';' comments are skipped. Throws ParseError on a SPEAKER line that does not
// have 10 fields, has a non-numeric time or a non-positive duration.
AnnotationSet parse_rttm(std::istream& in);
AnnotationSet read_rttm_file(const std::string& path);

// Writes one SPEAKER line per turn, files sorted, times with 3 decimals.
void write_rttm(const AnnotationSet& annotations, std::ostream& out);

// Frame t covers [t / frame_rate, (t + 1) / frame_rate).
struct FrameGrid {
  double frame_rate = kDefaultFrameRate;
  std::int64_t num_frames = 0;

  double frame_start(std::int64_t t) const { return t / frame_rate; }
  double duration() const { return num_frames / frame_rate; }
};

// Number of whole frames in `seconds`, rounding down (with a small tolerance
// so that e.g. 7.5 s at 100/3 fps is exactly 250 frames).
std::int64_t seconds_to_frames(double seconds, double frame_rate);

// Dense binary frames x speakers matrix.
class ActivityMatrix {
 public:
  ActivityMatrix() = default;
  ActivityMatrix(std::size_t num_frames, std::size_t num_speakers)
      : num_frames_(num_frames),
        num_speakers_(num_speakers),
        data_(num_frames * num_speakers, 0) {}

  std::size_t num_frames() const { return num_frames_; }
  std::size_t num_speakers() const { return num_speakers_; }

  std::uint8_t at(std::size_t t, std::size_t s) const {
    return data_[t * num_speakers_ + s];
  }
  void set(std::size_t t, std::size_t s, std::uint8_t v) {
    data_[t * num_speakers_ + s] = v;
  }
  std::span<const std::uint8_t> row(std::size_t t) const {
    return {data_.data() + t * num_speakers_, num_speakers_};
  }
  int active_count(std::size_t t) const;

  bool operator==(const ActivityMatrix&) const = default;

 private:
  std::size_t num_frames_ = 0;
  std::size_t num_speakers_ = 0;
  std::vector<std::uint8_t> data_;
};

// Reference of one window rasterized on the frame grid. Column s belongs to
// speakers[s]; speakers are ordered by descending speech duration inside the
// window, ties by name.
struct WindowReference {
  ActivityMatrix activity;
  std::vector<std::string> speakers;
};

// Rasterizes the turns of one file over frames [begin_frame, end_frame).
// A frame is active for a speaker when that speaker's (merged) turns cover at
// least half of the frame. Speakers with no speech inside the window get no
// column. Throws if the frame range is empty-inverted or negative.
WindowReference rasterize(std::span<const Segment> segments, double frame_rate,
                          std::int64_t begin_frame, std::int64_t end_frame);

// Same, with the window given in seconds and snapped to frame boundaries.
WindowReference rasterize(std::span<const Segment> segments,
                          const FrameGrid& grid, double start_s, double end_s);

}  // namespace diacal

#endif  // DIACAL_ANNOTATIONS_H_
