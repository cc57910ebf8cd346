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
#include <numbers>

#include <gtest/gtest.h>

#include "avsd/common.h"
#include "avsd/dsp.h"
#include "avsd/rng.h"
#include "avsd/wav.h"

namespace avsd {
namespace {

// Frozen output of tests/oracles/mel_centers.py (80 filters, 16 kHz).
constexpr double kOracleCenters[80] = {
    22.1200657269,   44.9391276078,   68.4792739867,   92.7632912015,
    117.8146856405,  143.6577064959,  170.3173692369,  197.8194798238,
    226.1906596875,  255.4583714988,  285.6509457515,  316.7976081856,
    348.9285080771,  382.0747474221,  416.2684110427,  451.5425976443,
    487.9314518547,  525.4701972748,  564.1951705749,  604.1438566675,
    645.3549249915,  687.8682669442,  731.7250344943,  776.9676800170,
    823.6399973863,  871.7871643668,  921.4557863447,  972.6939414408,
    1025.5512270489, 1080.0788078453, 1136.3294653148, 1194.3576488420,
    1254.2195284173, 1315.9730490079, 1379.6779866475, 1445.3960062982,
    1513.1907215404, 1583.1277561500, 1655.2748076200, 1729.7017126907,
    1806.4805149500, 1885.6855345699, 1967.3934402469, 2051.6833234152,
    2138.6367748060, 2228.3379634254, 2320.8737180277, 2416.3336111641,
    2514.8100458869, 2616.3983451935, 2721.1968442968, 2829.3069858119,
    2940.8334179499, 3055.8840958154, 3174.5703859042, 3297.0071739038,
    3423.3129759006, 3553.6100531000, 3688.0245301732, 3826.6865173429,
    3969.7302363269, 4117.2941502619, 4269.5210977329, 4426.5584310374,
    4588.5581588195, 4755.6770932105, 4928.0770016201, 5105.9247633229,
    5289.3925309947, 5478.6578973517, 5673.9040670568, 5875.3200340574,
    6083.1007645272, 6297.4473855896, 6518.5673800037, 6746.6747870036,
    6981.9904094829, 7224.7420277276, 7475.1646199022, 7733.5005895031};
// Same script: index of the centre nearest to 1 kHz.
constexpr size_t kOracleNearest1k = 28;

AudioSignal Tone(double hz, double seconds, double amp = 1.0) {
  AudioSignal s;
  const size_t n = static_cast<size_t>(seconds * s.sample_rate_hz);
  s.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    s.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i /
                                  s.sample_rate_hz);
  }
  return s;
}

AudioSignal Noise(size_t n, uint64_t seed) {
  AudioSignal s;
  Rng rng(seed);
  s.samples.resize(n);
  for (auto& x : s.samples) x = rng.Uniform(-0.5, 0.5);
  return s;
}

TEST(FrameSignalTest, CountsAndBoundaries) {
  AudioSignal s;
  s.samples.assign(16000, 0.0);
  const auto frames = FrameSignal(s);
  EXPECT_EQ(frames.size(), 98u);
  EXPECT_EQ(frames[0].size(), 400u);
  s.samples.assign(400, 0.0);
  EXPECT_EQ(FrameSignal(s).size(), 1u);
  s.samples.assign(399, 0.0);
  EXPECT_THROW(FrameSignal(s), Error);
}

TEST(FrameSignalTest, FrameCountFormulaHoldsForRandomLengths) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t win = 1 + rng.Below(600);
    const size_t hop = 1 + rng.Below(win);
    const size_t len = win + rng.Below(5000);
    EXPECT_EQ(NumFrames(len, win, hop), 1 + (len - win) / hop);
  }
}

TEST(FrameSignalTest, FrameStartsAtMultiplesOfHop) {
  AudioSignal s;
  for (int i = 0; i < 1000; ++i) s.samples.push_back(i / 1000.0);
  const auto frames = FrameSignal(s);
  for (size_t i = 0; i < frames.size(); ++i) {
    EXPECT_DOUBLE_EQ(frames[i][0], s.samples[i * 160]);
  }
}

TEST(LogMelTest, SilenceHitsTheEnergyFloor) {
  AudioSignal s;
  s.samples.assign(16000, 0.0);
  const auto f = LogMel(s);
  ASSERT_EQ(f.num_frames(), 98u);
  ASSERT_EQ(f.num_mels(), 80u);
  for (size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_EQ(f.values[i], std::log(1e-10));
  }
}

TEST(LogMelTest, SineEnergyPeaksAtNearestFilter) {
  const auto f = LogMel(Tone(1000.0, 1.0));
  for (size_t t = 0; t < f.num_frames(); ++t) {
    size_t best = 0;
    for (size_t m = 1; m < 80; ++m) {
      if (f.values.at(t, m) > f.values.at(t, best)) best = m;
    }
    ASSERT_EQ(best, kOracleNearest1k) << "frame " << t;
  }
}

TEST(LogMelTest, DeterministicAndFinite) {
  const AudioSignal s = Noise(8000, 5);
  const auto a = LogMel(s), b = LogMel(s);
  EXPECT_EQ(a.values, b.values);
  EXPECT_TRUE(a.values.AllFinite());
}

TEST(LogMelTest, ShiftByHopShiftsFrames) {
  const AudioSignal s = Noise(6000, 9);
  AudioSignal shifted;
  const size_t k = 3;
  shifted.samples.assign(s.samples.begin() + k * 160, s.samples.end());
  const auto a = LogMel(s), b = LogMel(shifted);
  for (size_t t = 0; t < b.num_frames(); ++t) {
    for (size_t m = 0; m < 80; ++m) {
      ASSERT_EQ(b.values.at(t, m), a.values.at(t + k, m));
    }
  }
}

TEST(LogMelTest, ExtremeInputStaysFinite) {
  AudioSignal s;
  s.samples.assign(1000, 1.0);
  s.samples[10] = -1.0;
  EXPECT_TRUE(LogMel(s).values.AllFinite());
}

TEST(MelFilterbankTest, CentersMatchOracle) {
  const auto c = MelCenterFrequencies(80, 16000);
  ASSERT_EQ(c.size(), 80u);
  for (size_t i = 0; i < 80; ++i) EXPECT_NEAR(c[i], kOracleCenters[i], 1e-6);
}

TEST(MelFilterbankTest, RowsAreNonEmptyTrianglesWithRisingPeaks) {
  const Tensor fb = MelFilterbankMatrix(80, 512, 16000);
  ASSERT_EQ(fb.rows(), 80u);
  ASSERT_EQ(fb.cols(), 257u);
  size_t prev_peak = 0;
  for (size_t m = 0; m < 80; ++m) {
    size_t peak = 0;
    bool any = false;
    for (size_t k = 0; k < 257; ++k) {
      EXPECT_GE(fb.at(m, k), 0.0);
      any |= fb.at(m, k) > 0;
      if (fb.at(m, k) > fb.at(m, peak)) peak = k;
    }
    EXPECT_TRUE(any) << "filter " << m;
    if (m > 0) EXPECT_GE(peak, prev_peak);
    prev_peak = peak;
  }
  // Interior bins are covered by at least one filter.
  for (size_t k = 1; k < 256; ++k) {
    double sum = 0;
    for (size_t m = 0; m < 80; ++m) sum += fb.at(m, k);
    EXPECT_GT(sum, 0.0) << "bin " << k;
  }
}

TEST(MelFilterbankTest, SingleFilterSpansTheBand) {
  const Tensor fb = MelFilterbankMatrix(1, 512, 16000);
  EXPECT_EQ(fb.at(0, 0), 0.0);
  EXPECT_EQ(fb.at(0, 256), 0.0);
  for (size_t k = 1; k < 256; ++k) EXPECT_GT(fb.at(0, k), 0.0);
}

TEST(MelFilterbankTest, TooManyFiltersIsAnError) {
  EXPECT_THROW(MelFilterbankMatrix(200, 64, 16000), ConfigError);
}

TEST(MelScaleTest, HtkFormulaAndInverse) {
  EXPECT_NEAR(HzToMel(700.0), 2595.0 * std::log10(2.0), 1e-12);
  for (double f : {0.0, 100.0, 1000.0, 7999.0}) {
    EXPECT_NEAR(MelToHz(HzToMel(f)), f, 1e-9);
  }
  EXPECT_EQ(NextPowerOfTwo(400), 512u);
  EXPECT_EQ(NextPowerOfTwo(512), 512u);
}

TEST(WavTest, RoundTripWithinQuantization) {
  const AudioSignal s = Tone(440.0, 0.1, 0.5);
  const std::string path =
      (std::filesystem::temp_directory_path() / "avsd_wav_test.wav").string();
  WriteWav(path, s);
  const AudioSignal r = ReadWav(path);
  ASSERT_EQ(r.samples.size(), s.samples.size());
  EXPECT_EQ(r.sample_rate_hz, 16000);
  for (size_t i = 0; i < s.samples.size(); ++i) {
    EXPECT_NEAR(r.samples[i], s.samples[i], 1.0 / 16000);
  }
  std::filesystem::remove(path);
}

TEST(FeatureFileTest, RoundTrip) {
  const auto f = LogMel(Noise(4000, 2));
  const std::string path =
      (std::filesystem::temp_directory_path() / "avsd_feat_test.lmel").string();
  WriteFeatures(path, f);
  const auto r = ReadFeatures(path);
  ASSERT_EQ(r.values.shape(), f.values.shape());
  for (size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_EQ(r.values[i], static_cast<double>(static_cast<float>(f.values[i])));
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace avsd
