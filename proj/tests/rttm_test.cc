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

#include <algorithm>

#include <gtest/gtest.h>

#include "avsd/common.h"
#include "avsd/rng.h"
#include "avsd/rttm.h"
#include "test_util.h"

namespace avsd {
namespace {

TEST(ParseRttmTest, SingleLine) {
  const auto m = ParseRttm("SPEAKER S1 1 0.00 5.00 <NA> <NA> A <NA> <NA>\n");
  ASSERT_EQ(m.size(), 1u);
  const auto& a = m.at("S1");
  ASSERT_EQ(a.entries.size(), 1u);
  EXPECT_EQ(a.entries[0], (Segment{"A", 0.0, 5.0}));
}

TEST(ParseRttmTest, EmptyAndBlankInput) {
  EXPECT_TRUE(ParseRttm("").empty());
  EXPECT_TRUE(ParseRttm("\n\n   \n").empty());
}

TEST(ParseRttmTest, MalformedLineReportsLineNumber) {
  try {
    ParseRttm("SPEAKER S1 1 x 5.0 <NA> <NA> A <NA> <NA>\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
  }
  try {
    ParseRttm("\nSPEAKER S1 1 0 5.0 <NA> <NA> A <NA> <NA>\nSPEAKER S1 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(ParseRttmTest, OtherRecordTypesStrictOrLenient) {
  const std::string text =
      "SPKR-INFO S1 1 <NA> <NA> <NA> unknown A <NA> <NA>\n"
      "SPEAKER S1 1 1.00 2.00 <NA> <NA> A <NA> <NA>\n";
  EXPECT_THROW(ParseRttm(text), ParseError);
  const auto m = ParseRttm(text, /*lenient=*/true);
  EXPECT_EQ(m.at("S1").entries.size(), 1u);
}

TEST(ParseRttmTest, OverlappingSameSpeakerSegmentsMerge) {
  const auto m = ParseRttm(
      "SPEAKER S 1 0.00 2.00 <NA> <NA> A <NA> <NA>\n"
      "SPEAKER S 1 1.00 2.00 <NA> <NA> A <NA> <NA>\n"
      "SPEAKER S 1 1.00 2.00 <NA> <NA> B <NA> <NA>\n");
  const auto& e = m.at("S").entries;
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].speaker, "A");
  EXPECT_DOUBLE_EQ(e[0].duration_s, 3.0);
  EXPECT_EQ(e[1].speaker, "B");
}

TEST(WriteRttmTest, FormatAndRounding) {
  DiarizationAnnotation a;
  a.session_id = "S1";
  a.entries = {{"A", 1.234, 2.0}};
  EXPECT_EQ(WriteRttm(a), "SPEAKER S1 1 1.23 2.00 <NA> <NA> A <NA> <NA>\n");
  EXPECT_EQ(FormatCentiseconds(0.125), "0.12");  // half to even
  EXPECT_EQ(FormatCentiseconds(0.375), "0.38");
}

TEST(WriteRttmTest, RoundTripAndPermutationStability) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    auto a = testing::RandomGridAnnotation(rng, "sess", 3, 6);
    if (a.entries.empty()) continue;
    const std::string text = WriteRttm(a);
    const auto back = ParseRttm(text);
    EXPECT_EQ(back.at("sess"), a);
    auto shuffled = a;
    for (size_t k = shuffled.entries.size(); k > 1; --k) {
      std::swap(shuffled.entries[k - 1], shuffled.entries[rng.Below(k)]);
    }
    EXPECT_EQ(WriteRttm(shuffled), text);
  }
}

TEST(LabelsTest, HalfFrameRule) {
  DiarizationAnnotation a;
  a.entries = {{"A", 0.0, 0.05}};
  auto l = AnnotationToLabels(a, {"A"}, 0.01, 10);
  for (size_t t = 0; t < 10; ++t) EXPECT_EQ(l.labels.at(0, t), t < 5 ? 1 : 0);
  a.entries = {{"A", 0.016, 0.004}};  // 4 ms of frame 1
  l = AnnotationToLabels(a, {"A"}, 0.01, 10);
  for (size_t t = 0; t < 10; ++t) EXPECT_EQ(l.labels.at(0, t), 0.0);
  a.entries = {{"A", 0.015, 0.01}};  // 5 ms in frames 1 and 2
  l = AnnotationToLabels(a, {"A"}, 0.01, 10);
  EXPECT_EQ(l.labels.at(0, 1), 1.0);
  EXPECT_EQ(l.labels.at(0, 2), 1.0);
}

TEST(LabelsTest, UnknownSpeakerIsAnError) {
  DiarizationAnnotation a;
  a.entries = {{"Z", 0.0, 1.0}};
  EXPECT_THROW(AnnotationToLabels(a, {"A"}, 0.01, 10), Error);
}

TEST(LabelsTest, GridAnnotationsRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto a = testing::RandomGridAnnotation(rng, "s", 3, 5);
    const auto l = AnnotationToLabels(a, {"A", "B", "C"}, 0.01, 4000);
    auto back = LabelsToAnnotation(l, "s");
    EXPECT_EQ(back, a);
  }
}

TEST(LabelsTest, ActiveDurationCloseToSegmentDuration) {
  DiarizationAnnotation a;
  a.entries = {{"A", 0.123, 1.456}, {"A", 3.001, 0.5}};
  const auto l = AnnotationToLabels(a, {"A"}, 0.01, 500);
  double active = 0;
  for (size_t t = 0; t < 500; ++t) active += l.labels.at(0, t) * 0.01;
  EXPECT_LT(std::abs(active - a.TotalDuration()), 0.01 * 4 + 1e-9);
}

}  // namespace
}  // namespace avsd
