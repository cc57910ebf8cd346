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

#ifndef AVSD_TRAINER_H_
#define AVSD_TRAINER_H_

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "avsd/models.h"
#include "avsd/params.h"
#include "avsd/rttm.h"
#include "avsd/session.h"
#include "avsd/tensor.h"

namespace avsd {

// Mean binary cross-entropy between probabilities and 0/1 labels of the same
// shape, probabilities clamped to [1e-7, 1 - 1e-7].
double BceLoss(const Tensor& probs, const Tensor& labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void Validate() const;
};

// Adam with bias correction. Moment buffers live in ParameterStores keyed by
// parameter name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) { cfg_.Validate(); }

  // Updates every parameter named in `trainable` from `grads`.
  void Step(ParameterStore* params, const Gradients& grads,
            const std::vector<std::string>& trainable);

  size_t step() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const ParameterStore& m() const { return m_; }
  const ParameterStore& v() const { return v_; }
  void Restore(size_t step, ParameterStore m, ParameterStore v);

 private:
  AdamConfig cfg_;
  size_t step_ = 0;
  ParameterStore m_;
  ParameterStore v_;
};

struct TrainConfig {
  AdamConfig adam;
  size_t batch_size = 4;
  size_t chunk_frames = 600;
  size_t epochs = 4;
  size_t steps_per_epoch = 50;
  uint64_t seed = 0;
  std::set<std::string> frozen_modules = {kLipEncoder, kSpeakerExtractor};
  // false freezes the speaker encoder as well (ablation).
  bool joint_speaker_encoder = true;

  void Validate() const;
  // Parameter prefixes that never receive updates.
  std::vector<std::string> FrozenPrefixes() const;
};

struct TrainingSession {
  SessionInputs inputs;
  Tensor labels;  // [S, T]
};

// Builds training targets aligned to the session's frames.
TrainingSession MakeTrainingSession(SessionInputs inputs,
                                    const DiarizationAnnotation& reference);

// One (session, offset) item of a batch.
struct BatchItem {
  size_t session = 0;
  size_t start = 0;
  size_t length = 0;
};

// Batch composition depends only on (seed, epoch, step), so a resumed run
// sees exactly the batches of an uninterrupted one.
std::vector<BatchItem> SampleBatch(const std::vector<TrainingSession>& data,
                                   const TrainConfig& cfg, size_t epoch,
                                   size_t step);

struct TrainingState {
  ParameterStore params;
  Adam adam;
  size_t epoch = 0;  // completed epochs
  size_t global_step = 0;
};

void SaveTrainingState(const std::string& path, const TrainingState& state);
TrainingState LoadTrainingState(const std::string& path,
                                const AdamConfig& adam = {});
// Loads model parameters from either a plain or a training checkpoint.
ParameterStore LoadModelParameters(const std::string& path);

using StepCallback =
    std::function<void(size_t global_step, double loss, double lr)>;
using EpochCallback = std::function<void(const TrainingState&)>;

// Loss and gradients of one batch.
double BatchLoss(const ModelConfig& model, const TrainConfig& cfg,
                 ParameterStore* params,
                 const std::vector<TrainingSession>& data,
                 const std::vector<BatchItem>& batch, Gradients* grads,
                 std::vector<std::string>* trainable);

// Trains speaker encoder and decoder from state->epoch up to cfg.epochs.
// Frozen modules are never touched.
void JointTrain(const ModelConfig& model, const TrainConfig& cfg,
                const std::vector<TrainingSession>& data, TrainingState* state,
                const StepCallback& on_step = {},
                const EpochCallback& on_epoch = {});

struct PretrainConfig {
  AdamConfig adam;
  size_t steps = 200;
  size_t batch_size = 8;
  uint64_t seed = 0;
  // Reuse the first batch_size examples every step (for diagnostics).
  bool fixed_batch = false;
  double logit_scale = 10.0;

  void Validate() const;
};

struct LabeledClip {
  Tensor features;  // [T, n_mels]
  int identity = 0;
};

// Cuts single-speaker stretches of a session into clips of `clip_frames`.
std::vector<LabeledClip> ClipsFromSession(
    const Tensor& features, const DiarizationAnnotation& reference,
    const std::map<std::string, int>& identities, size_t clip_frames);

// Speaker-classification pretraining of the utterance extractor. The
// classifier head is discarded; only speaker_extractor/* is returned.
ParameterStore PretrainExtractor(const EncoderConfig& cfg,
                                 const std::vector<LabeledClip>& clips,
                                 const PretrainConfig& pcfg,
                                 std::vector<double>* losses = nullptr);

struct LipClip {
  Tensor lip;       // [T_v, D_v]
  Tensor activity;  // [T_v, 1] in {0, 1}
};

// Video-rate clips of `clip_frames` with activity targets; a video frame is
// active when at least half of its acoustic frames are.
std::vector<LipClip> LipClipsFromSession(const std::vector<Tensor>& lips,
                                         const Tensor& labels, size_t upsample,
                                         size_t clip_frames);

// Activity-detection pretraining of the lip encoder and its head; returns
// lip_encoder/*.
ParameterStore PretrainLipEncoder(const LipEncoderConfig& cfg,
                                  const std::vector<LipClip>& clips,
                                  const PretrainConfig& pcfg,
                                  std::vector<double>* losses = nullptr);

}  // namespace avsd

#endif  // AVSD_TRAINER_H_
