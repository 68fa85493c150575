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

#include "diacal/posteriors.h"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "diacal/error.h"
#include "diacal/label_space.h"

namespace diacal {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'S', 'T', '1'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 2 + 8 + 8 + 4 + 4 + 4;

template <typename T>
void put_le(std::string* buf, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf->push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

// Reads exactly n bytes or reports how many were available.
void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != n) {
    throw FormatError(fmt::format("truncated {}: expected {} bytes, got {}",
                                  what, n, got));
  }
}

}  // namespace

void PosteriorTrack::validate() const {
  if (!(grid.frame_rate > 0.0) || !std::isfinite(grid.frame_rate)) {
    throw Error(fmt::format("{}: frame rate must be positive", file_id));
  }
  if (num_classes < 1) {
    throw Error(fmt::format("{}: num_classes must be positive", file_id));
  }
  if (!(window_length > 0.0f) || !(window_stride > 0.0f)) {
    throw Error(fmt::format("{}: window length and stride must be positive",
                            file_id));
  }
  if (grid.num_frames < 0 ||
      probs.size() != static_cast<std::size_t>(grid.num_frames) *
                          static_cast<std::size_t>(num_classes)) {
    throw Error(fmt::format("{}: {} values for {} frames x {} classes", file_id,
                            probs.size(), grid.num_frames, num_classes));
  }
  for (std::int64_t t = 0; t < grid.num_frames; ++t) {
    try {
      top_label(row(t));
    } catch (const Error& e) {
      throw Error(fmt::format("{}: frame {}: {}", file_id, t, e.what()));
    }
  }
}

void write_posteriors(const PosteriorTrack& track, std::ostream& out) {
  std::string buf;
  buf.reserve(kHeaderBytes + track.probs.size() * 4 + 4 +
              track.file_id.size());
  buf.append(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(&buf, kPosteriorFormatVersion);
  put_le<std::uint16_t>(&buf, 0);
  put_le<double>(&buf, track.grid.frame_rate);
  put_le<std::uint64_t>(&buf, static_cast<std::uint64_t>(track.grid.num_frames));
  put_le<std::uint32_t>(&buf, static_cast<std::uint32_t>(track.num_classes));
  put_le<float>(&buf, track.window_length);
  put_le<float>(&buf, track.window_stride);
  for (float p : track.probs) put_le<float>(&buf, p);
  put_le<std::uint32_t>(&buf, static_cast<std::uint32_t>(track.file_id.size()));
  buf += track.file_id;
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write_posteriors: stream write failed");
}

PosteriorTrack read_posteriors(std::istream& in) {
  std::array<char, kHeaderBytes> header{};
  in.read(header.data(), 4);
  if (in.gcount() != 4 || std::memcmp(header.data(), kMagic.data(), 4) != 0) {
    throw FormatError("bad magic");
  }
  read_exact(in, header.data() + 4, kHeaderBytes - 4, "header");
  const char* p = header.data() + 4;
  const auto version = get_le<std::uint16_t>(p);
  if (version != kPosteriorFormatVersion) {
    throw FormatError(fmt::format("version mismatch: file has {}, expected {}",
                                  version, kPosteriorFormatVersion));
  }
  PosteriorTrack track;
  track.grid.frame_rate = get_le<double>(p + 4);
  const auto num_frames = get_le<std::uint64_t>(p + 12);
  const auto num_classes = get_le<std::uint32_t>(p + 20);
  track.window_length = get_le<float>(p + 24);
  track.window_stride = get_le<float>(p + 28);
  if (num_classes == 0 || num_frames > (std::uint64_t{1} << 40) / num_classes) {
    throw FormatError(fmt::format("implausible shape {} x {}", num_frames,
                                  num_classes));
  }
  track.grid.num_frames = static_cast<std::int64_t>(num_frames);
  track.num_classes = static_cast<int>(num_classes);

  const std::size_t payload = num_frames * num_classes * 4;
  std::string bytes(payload, '\0');
  read_exact(in, bytes.data(), payload, "payload");
  track.probs.resize(num_frames * num_classes);
  for (std::size_t i = 0; i < track.probs.size(); ++i) {
    track.probs[i] = get_le<float>(bytes.data() + 4 * i);
  }

  std::array<char, 4> len_bytes{};
  read_exact(in, len_bytes.data(), 4, "file id length");
  const auto id_len = get_le<std::uint32_t>(len_bytes.data());
  track.file_id.assign(id_len, '\0');
  read_exact(in, track.file_id.data(), id_len, "file id");

  try {
    track.validate();
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return track;
}

void write_posteriors_file(const PosteriorTrack& track,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot create " + path);
  write_posteriors(track, out);
}

PosteriorTrack read_posteriors_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return read_posteriors(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

PosteriorTrack read_posteriors_csv(std::istream& in, const std::string& file_id,
                                   double frame_rate, float window_length,
                                   float window_stride) {
  PosteriorTrack track;
  track.file_id = file_id;
  track.grid.frame_rate = frame_rate;
  track.window_length = window_length;
  track.window_stride = window_stride;

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
        cell.pop_back();
      }
      cells.push_back(cell);
    }
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing CSV header");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "frame") {
    throw ParseError(1, "CSV header must start with 'frame'");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] != "c" + std::to_string(c - 1)) {
      throw ParseError(1, "unexpected CSV column '" + header[c] + "'");
    }
  }
  track.num_classes = static_cast<int>(header.size() - 1);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(line_no, fmt::format("{} cells, expected {}",
                                            cells.size(), header.size()));
    }
    std::int64_t frame = -1;
    auto [ptr, ec] = std::from_chars(cells[0].data(),
                                     cells[0].data() + cells[0].size(), frame);
    if (ec != std::errc() || frame != track.grid.num_frames) {
      throw ParseError(line_no, "frame index '" + cells[0] + "' out of order");
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      float v = 0.0f;
      auto [p2, ec2] = std::from_chars(cells[c].data(),
                                       cells[c].data() + cells[c].size(), v);
      if (ec2 != std::errc() || p2 != cells[c].data() + cells[c].size()) {
        throw ParseError(line_no, "non-numeric probability '" + cells[c] + "'");
      }
      track.probs.push_back(v);
    }
    ++track.grid.num_frames;
  }
  track.validate();
  return track;
}

}  // namespace diacal
