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

#include <gtest/gtest.h>

#include "avsd/common.h"
#include "avsd/ops.h"
#include "avsd/trainer.h"
#include "model_fixtures.h"
#include "test_util.h"

namespace avsd {
namespace {

using testing::RandomMatrix;

TEST(BceLossTest, Values) {
  Tensor half = Tensor::Matrix(2, 5, 0.5);
  EXPECT_NEAR(BceLoss(half, testing::RandomLabels(2, 5, 1)), std::log(2.0),
              1e-15);
  const Tensor y = testing::RandomLabels(3, 7, 2);
  EXPECT_LE(BceLoss(y, y), -std::log(1 - 1e-7) + 1e-15);
  Tensor flipped = y;
  for (size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
  EXPECT_TRUE(std::isfinite(BceLoss(flipped, y)));
  EXPECT_THROW(BceLoss(half, Tensor::Matrix(5, 2)), ShapeError);
}

TEST(BceLossTest, GradientCheck) {
  ParameterStore s(1);
  Tensor p = RandomMatrix(2, 5, 3);
  for (size_t i = 0; i < p.size(); ++i) p[i] = 0.1 + 0.8 / (1 + std::exp(-p[i]));
  s.Set("p", p);
  const Tensor y = testing::RandomLabels(2, 5, 4);
  auto loss = [&](Tape& t, ParameterStore& st) {
    return nn::BceLoss(testing::In(t, st, "p"), y);
  };
  const auto r = testing::CheckGradients(s, loss, {"p"});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(AdamTest, FirstStepOpposesGradientSign) {
  ParameterStore p(1);
  p.Set("w", RandomMatrix(3, 4, 5));
  const Tensor before = p.Get("w");
  Gradients g;
  g["w"] = RandomMatrix(3, 4, 6);
  g["w"][0] = 0.0;
  Adam adam;
  adam.Step(&p, g, {"w"});
  EXPECT_EQ(adam.step(), 1u);
  const Tensor& after = p.Get("w");
  EXPECT_EQ(after[0], before[0]);
  for (size_t i = 1; i < 12; ++i) {
    const double d = after[i] - before[i];
    EXPECT_LT(d * g["w"][i], 0.0);
    // Bias-corrected first step has magnitude close to lr.
    EXPECT_NEAR(std::abs(d), 1e-3, 1e-5);
  }
}

TEST(TrainConfigTest, FrozenPrefixes) {
  TrainConfig c;
  auto f = c.FrozenPrefixes();
  EXPECT_EQ(std::count(f.begin(), f.end(), kSpeakerEncoder), 0);
  c.joint_speaker_encoder = false;
  f = c.FrozenPrefixes();
  EXPECT_EQ(std::count(f.begin(), f.end(), kSpeakerEncoder), 1);
  EXPECT_EQ(std::count(f.begin(), f.end(), kLipEncoder), 1);
  c.frozen_modules.insert("decoder");
  EXPECT_THROW(c.Validate(), ConfigError);
}

class JointTrainTest : public ::testing::Test {
 protected:
  void SetUp() override {
    model_ = testing::ToyModel();
    init_ = InitParameters(model_, 3);
    data_ = testing::ToyTrainingData(model_, init_, 2, 12.0, 50);
    cfg_.batch_size = 2;
    cfg_.chunk_frames = 200;
    cfg_.epochs = 1;
    cfg_.steps_per_epoch = 10;
    cfg_.seed = 9;
  }

  ModelConfig model_;
  ParameterStore init_;
  std::vector<TrainingSession> data_;
  TrainConfig cfg_;
};

void ExpectPrefixUnchanged(const ParameterStore& a, const ParameterStore& b,
                           const std::string& prefix) {
  const auto names = a.NamesWithPrefix(prefix);
  ASSERT_FALSE(names.empty()) << prefix;
  for (const auto& n : names) EXPECT_EQ(a.Get(n).vec(), b.Get(n).vec()) << n;
}

bool PrefixChanged(const ParameterStore& a, const ParameterStore& b,
                   const std::string& prefix) {
  for (const auto& n : a.NamesWithPrefix(prefix))
    if (a.Get(n).vec() != b.Get(n).vec()) return true;
  return false;
}

TEST_F(JointTrainTest, FrozenModulesAreUntouched) {
  TrainingState st{init_, Adam(cfg_.adam)};
  JointTrain(model_, cfg_, data_, &st);
  EXPECT_EQ(st.global_step, 10u);
  ExpectPrefixUnchanged(init_, st.params, "lip_encoder/");
  ExpectPrefixUnchanged(init_, st.params, "speaker_extractor/");
  EXPECT_TRUE(PrefixChanged(init_, st.params, "speaker_encoder/"));
  EXPECT_TRUE(PrefixChanged(init_, st.params, "decoder/"));
  for (const auto& [name, m] : st.adam.m().entries()) {
    EXPECT_NE(name.rfind("lip_encoder/", 0), 0u) << name;
  }
}

TEST_F(JointTrainTest, FrozenSpeakerEncoderAblation) {
  cfg_.joint_speaker_encoder = false;
  TrainingState st{init_, Adam(cfg_.adam)};
  JointTrain(model_, cfg_, data_, &st);
  ExpectPrefixUnchanged(init_, st.params, "speaker_encoder/");
  EXPECT_TRUE(PrefixChanged(init_, st.params, "decoder/"));
}

TEST_F(JointTrainTest, FixedBatchLossDecreases) {
  const auto batch = SampleBatch(data_, cfg_, 0, 0);
  ParameterStore p = init_;
  Adam adam(cfg_.adam);
  double first = 0, last = 0;
  for (int step = 0; step <= 50; ++step) {
    Gradients g;
    std::vector<std::string> trainable;
    const double loss = BatchLoss(model_, cfg_, &p, data_, batch, &g, &trainable);
    if (step == 0) first = loss;
    last = loss;
    adam.Step(&p, g, trainable);
  }
  EXPECT_LT(last, first);
}

TEST_F(JointTrainTest, BatchesDependOnlyOnSeedEpochAndStep) {
  const auto a = SampleBatch(data_, cfg_, 1, 3);
  const auto b = SampleBatch(data_, cfg_, 1, 3);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].session, b[i].session);
    EXPECT_EQ(a[i].start, b[i].start);
    EXPECT_LE(a[i].start + a[i].length, data_[a[i].session].labels.cols());
  }
}

TEST_F(JointTrainTest, ResumeIsBitExact) {
  cfg_.epochs = 2;
  cfg_.steps_per_epoch = 3;
  const std::string ckpt = ::testing::TempDir() + "/avsd_epoch1.ckpt";
  TrainingState full{init_, Adam(cfg_.adam)};
  JointTrain(model_, cfg_, data_, &full, {}, [&](const TrainingState& s) {
    if (s.epoch == 1) SaveTrainingState(ckpt, s);
  });
  TrainingState resumed = LoadTrainingState(ckpt, cfg_.adam);
  EXPECT_EQ(resumed.epoch, 1u);
  EXPECT_EQ(resumed.global_step, 3u);
  JointTrain(model_, cfg_, data_, &resumed);
  EXPECT_EQ(resumed.params, full.params);
  EXPECT_EQ(resumed.adam.step(), full.adam.step());
  EXPECT_EQ(LoadModelParameters(ckpt).NamesWithPrefix("__adam__").size(), 0u);
}

std::vector<LabeledClip> ToyClips(int identities, int per_identity) {
  std::vector<LabeledClip> clips;
  for (int id = 0; id < identities; ++id) {
    for (int k = 0; k < per_identity; ++k) {
      Tensor f = RandomMatrix(30, 80, 100 * id + k, 0.3);
      for (size_t r = 0; r < 30; ++r) f.at(r, 10 * id + 5) += 3.0;
      clips.push_back({f, id});
    }
  }
  return clips;
}

TEST(PretrainExtractorTest, FixedBatchLossDecreasesAndIsDeterministic) {
  PretrainConfig p;
  p.steps = 5;
  p.batch_size = 4;
  p.fixed_batch = true;
  const auto cfg = EncoderConfig::Toy(EncoderKind::kResNetSE);
  const auto clips = ToyClips(3, 4);
  std::vector<double> losses;
  const auto a = PretrainExtractor(cfg, clips, p, &losses);
  ASSERT_EQ(losses.size(), 5u);
  for (size_t i = 1; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]);
  EXPECT_EQ(a, PretrainExtractor(cfg, clips, p));
  for (const auto& [n, t] : a.entries()) EXPECT_EQ(n.rfind("speaker_extractor/", 0), 0u);
}

TEST(PretrainExtractorTest, SingleIdentityIsAnError) {
  EXPECT_THROW(PretrainExtractor(EncoderConfig::Toy(EncoderKind::kResNetSE),
                                 ToyClips(1, 4), PretrainConfig()),
               Error);
}

TEST(PretrainLipEncoderTest, LossDecreasesAndKeepsHead) {
  LipEncoderConfig cfg;
  Tensor lip = RandomMatrix(400, cfg.input_dim, 1);
  Tensor labels = Tensor::Matrix(1, 1600);
  for (size_t v = 0; v < 400; ++v) {
    const bool on = (v / 25) % 2 == 0;
    for (size_t k = 0; k < 4; ++k) labels.at(0, 4 * v + k) = on;
    if (on) lip.at(v, 0) += 3.0;
  }
  const auto clips = LipClipsFromSession({lip}, labels, 4, 50);
  ASSERT_EQ(clips.size(), 8u);
  EXPECT_EQ(clips[0].activity.at(0, 0), 1.0);
  PretrainConfig p;
  p.steps = 30;
  p.batch_size = 4;
  p.adam.lr = 3e-3;
  std::vector<double> losses;
  const auto out = PretrainLipEncoder(cfg, clips, p, &losses);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_FALSE(out.NamesWithPrefix("lip_encoder/head/").empty());
}

TEST(ClipsFromSessionTest, CutsSingleSpeakerStretches) {
  DiarizationAnnotation ref;
  ref.session_id = "s";
  ref.entries = {{"a", 0.0, 2.5}, {"b", 2.0, 3.0}};
  ref.Normalize();
  const Tensor feats = RandomMatrix(500, 80, 2);
  const auto clips = ClipsFromSession(feats, ref, {{"a", 0}, {"b", 1}}, 100);
  // a alone on [0, 2.0): 2 clips; b alone on [2.5, 5.0): 2 clips.
  ASSERT_EQ(clips.size(), 4u);
  EXPECT_EQ(clips[0].identity, 0);
  EXPECT_EQ(clips[3].identity, 1);
  EXPECT_EQ(clips[0].features.rows(), 100u);
}

}  // namespace
}  // namespace avsd
