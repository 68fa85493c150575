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

#include <cstring>
#include <random>
#include <sstream>

#include "diacal/error.h"
#include "diacal/posteriors.h"
#include "doctest.h"

using namespace diacal;

namespace {

PosteriorTrack random_track(int frames, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  PosteriorTrack t;
  t.file_id = "rec-\xc3\xa9t\xc3\xa9";  // UTF-8 id
  t.grid = {kDefaultFrameRate, frames};
  t.num_classes = classes;
  t.window_length = 5.0f;
  t.window_stride = 2.5f;
  for (int f = 0; f < frames; ++f) {
    std::vector<double> row(classes);
    double sum = 0.0;
    for (double& x : row) sum += (x = u(rng));
    for (double x : row) t.probs.push_back(static_cast<float>(x / sum));
  }
  return t;
}

std::string serialize(const PosteriorTrack& t) {
  std::ostringstream out(std::ios::binary);
  write_posteriors(t, out);
  return out.str();
}

std::string read_error(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  try {
    read_posteriors(in);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("write then read a 10x7 track gives identical values") {
  const PosteriorTrack t = random_track(10, 7, 1);
  const std::string bytes = serialize(t);
  std::istringstream in(bytes, std::ios::binary);
  const PosteriorTrack r = read_posteriors(in);
  CHECK(r.file_id == t.file_id);
  CHECK(r.grid.frame_rate == t.grid.frame_rate);
  CHECK(r.grid.num_frames == 10);
  CHECK(r.num_classes == 7);
  CHECK(r.window_length == t.window_length);
  CHECK(r.window_stride == t.window_stride);
  REQUIRE(r.probs.size() == t.probs.size());
  CHECK(std::memcmp(r.probs.data(), t.probs.data(), t.probs.size() * 4) == 0);
  // Byte-exact on re-serialization.
  CHECK(serialize(r) == bytes);
}

TEST_CASE("PST1 header layout") {
  PosteriorTrack t;
  t.file_id = "ab";
  t.grid = {50.0, 1};
  t.num_classes = 2;
  t.window_length = 5.0f;
  t.window_stride = 5.0f;
  t.probs = {0.25f, 0.75f};
  const std::string b = serialize(t);
  REQUIRE(b.size() == 36 + 8 + 4 + 2);
  CHECK(b.substr(0, 4) == "PST1");
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 0);
  CHECK(b[7] == 0);
  // f64 50.0 = 0x4049000000000000, little-endian
  CHECK(static_cast<unsigned char>(b[15]) == 0x40);
  CHECK(static_cast<unsigned char>(b[14]) == 0x49);
  CHECK(b[16] == 1);  // num_frames
  CHECK(b[24] == 2);  // num_classes
  CHECK(b[44] == 2);  // id length
  CHECK(b.substr(48) == "ab");
}

TEST_CASE("read errors") {
  const std::string good = serialize(random_track(10, 7, 2));
  SUBCASE("bad magic") {
    std::string b = good;
    b[0] = 'X';
    CHECK(read_error(b) == "bad magic");
  }
  SUBCASE("version mismatch") {
    std::string b = good;
    b[4] = 2;
    CHECK(read_error(b).find("version mismatch") != std::string::npos);
  }
  SUBCASE("truncated payload names expected and actual byte counts") {
    // Keep the header and half of the rows.
    const std::string b = good.substr(0, 36 + 5 * 7 * 4);
    const std::string msg = read_error(b);
    CHECK(msg.find("truncated payload") != std::string::npos);
    CHECK(msg.find("expected 280 bytes") != std::string::npos);
    CHECK(msg.find("got 140") != std::string::npos);
  }
  SUBCASE("row-sum violation") {
    PosteriorTrack t = random_track(3, 7, 3);
    t.probs[7] += 0.1f;
    CHECK(read_error(serialize(t)).find("sum") != std::string::npos);
  }
}

TEST_CASE("round trip is bit-exact on random tracks") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PosteriorTrack t = random_track(1 + static_cast<int>(seed * 13), 2 + seed % 9, seed);
    const std::string bytes = serialize(t);
    std::istringstream in(bytes, std::ios::binary);
    CHECK(serialize(read_posteriors(in)) == bytes);
  }
}

TEST_CASE("CSV import") {
  std::istringstream in(
      "frame,c0,c1,c2\n"
      "0,0.7,0.1,0.2\n"
      "1,0.1,0.1,0.8\n");
  const PosteriorTrack t = read_posteriors_csv(in, "f", 10.0, 5.0f, 5.0f);
  CHECK(t.grid.num_frames == 2);
  CHECK(t.num_classes == 3);
  CHECK(t.row(1)[2] == doctest::Approx(0.8));

  std::istringstream bad_header("frame,c0,c2\n0,0.5,0.5\n");
  CHECK_THROWS_AS(read_posteriors_csv(bad_header, "f", 10.0, 5.0f, 5.0f), ParseError);
  std::istringstream bad_order("frame,c0,c1\n1,0.5,0.5\n");
  CHECK_THROWS_AS(read_posteriors_csv(bad_order, "f", 10.0, 5.0f, 5.0f), ParseError);
  std::istringstream bad_sum("frame,c0,c1\n0,0.5,0.6\n");
  CHECK_THROWS_AS(read_posteriors_csv(bad_sum, "f", 10.0, 5.0f, 5.0f), Error);
}
