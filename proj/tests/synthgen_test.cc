// Copyright (c) 2026 The avsd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "avsd/binary_io.h"
#include "avsd/common.h"
#include "avsd/synthgen.h"

namespace avsd {
namespace {

namespace fs = std::filesystem;

MeetingSpec Small(uint64_t seed) {
  MeetingSpec s;
  s.duration_s = 20.0;
  s.seed = seed;
  return s;
}

TEST(GenerateMeetingTest, Deterministic) {
  const auto a = GenerateMeeting(Small(3)), b = GenerateMeeting(Small(3));
  EXPECT_EQ(a.audio.samples, b.audio.samples);
  EXPECT_EQ(a.annotation, b.annotation);
  ASSERT_EQ(a.lips.size(), b.lips.size());
  for (size_t s = 0; s < a.lips.size(); ++s)
    EXPECT_EQ(a.lips[s].vec(), b.lips[s].vec());
}

TEST(GenerateMeetingTest, Lengths) {
  auto spec = Small(4);
  spec.num_speakers = 3;
  const auto m = GenerateMeeting(spec);
  EXPECT_EQ(m.audio.samples.size(), 20u * 16000u);
  ASSERT_EQ(m.lips.size(), 3u);
  for (const auto& l : m.lips) {
    EXPECT_EQ(l.rows(), 20u * 25u);
    EXPECT_EQ(l.cols(), 16u);
  }
  EXPECT_EQ(m.activity.rows(), 3u);
  EXPECT_EQ(m.activity.cols(), 2000u);
  EXPECT_NO_THROW(m.annotation.Validate());
  for (double x : m.audio.samples) ASSERT_LE(std::abs(x), 1.0);
}

TEST(GenerateMeetingTest, OverlapNearTarget) {
  MeetingSpec spec;
  spec.num_speakers = 2;
  spec.duration_s = 60.0;
  spec.overlap_ratio = 0.2;
  spec.seed = 7;
  const auto m = GenerateMeeting(spec);
  EXPECT_NEAR(MeasureOverlapRatio(m.annotation), 0.2, 0.05);
}

TEST(GenerateMeetingTest, DifferentSeedsDiffer) {
  const auto a = GenerateMeeting(Small(1)), b = GenerateMeeting(Small(2));
  bool differ = false;
  for (size_t i = 0; i < 16 && !differ; ++i)
    differ = a.audio.samples[i] != b.audio.samples[i];
  EXPECT_TRUE(differ);
}

TEST(GenerateMeetingTest, LipProjectionSeparatesSpeechFromSilence) {
  auto spec = Small(9);
  spec.duration_s = 60.0;
  spec.num_speakers = 3;
  const auto m = GenerateMeeting(spec);
  for (size_t s = 0; s < 3; ++s) {
    const auto dir = LipDirection(m.speaker_ids[s], spec.lip_dim);
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    size_t n[2] = {0, 0};
    for (size_t v = 0; v < m.lips[s].rows(); ++v) {
      double p = 0;
      for (size_t d = 0; d < dir.size(); ++d) p += m.lips[s].at(v, d) * dir[d];
      const int active = m.activity.at(s, 4 * v) > 0.5;
      sum[active] += p;
      sq[active] += p * p;
      ++n[active];
    }
    ASSERT_GT(n[0], 10u);
    ASSERT_GT(n[1], 10u);
    double mean[2], var[2];
    for (int k = 0; k < 2; ++k) {
      mean[k] = sum[k] / n[k];
      var[k] = sq[k] / n[k] - mean[k] * mean[k];
    }
    const double se = std::sqrt(var[0] / n[0] + var[1] / n[1]);
    EXPECT_GT(mean[1] - mean[0], 3 * se) << "speaker " << s;
  }
}

TEST(GenerateMeetingTest, FundamentalAndDirections) {
  EXPECT_EQ(SpeakerFundamentalHz(0), 120.0);
  EXPECT_EQ(SpeakerFundamentalHz(2), 200.0);
  const auto d = LipDirection(5, 16);
  double n = 0;
  for (double x : d) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_EQ(d, LipDirection(5, 16));
}

TEST(GenerateMeetingTest, InvalidSpec) {
  MeetingSpec s;
  s.num_speakers = 0;
  EXPECT_THROW(s.Validate(), ConfigError);
  s = MeetingSpec();
  s.duration_s = 0;
  EXPECT_THROW(s.Validate(), ConfigError);
  s = MeetingSpec();
  s.overlap_ratio = 0.7;
  EXPECT_THROW(s.Validate(), ConfigError);
}

TEST(GenerateCorpusTest, WritesManifestAndFiles) {
  CorpusOptions o;
  o.num_meetings = 10;
  o.meeting.duration_s = 6.0;
  o.seed = 1;
  o.out_dir = ::testing::TempDir() + "/avsd_corpus";
  fs::remove_all(o.out_dir);
  const auto records = GenerateCorpus(o);
  ASSERT_EQ(records.size(), 10u);
  const auto read = ReadManifest(o.out_dir + "/manifest.jsonl");
  ASSERT_EQ(read.size(), 10u);
  int train = 0, dev = 0;
  std::set<std::string> sessions;
  for (const auto& r : read) {
    train += r.split == "train";
    dev += r.split == "dev";
    sessions.insert(r.session);
    for (const auto& p : {r.wav, r.features, r.rttm}) EXPECT_TRUE(fs::exists(p)) << p;
    for (const auto& p : r.lips) EXPECT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(r.lips.size(), r.speakers.size());
    EXPECT_EQ(ReadLipFeatures(r.lips[0]).rows(), 150u);
  }
  EXPECT_EQ(train, 8);
  EXPECT_EQ(dev, 2);
  EXPECT_EQ(sessions.size(), 10u);
}

}  // namespace
}  // namespace avsd
