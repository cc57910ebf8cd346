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

#ifndef AVSD_SESSION_H_
#define AVSD_SESSION_H_

#include <string>
#include <vector>

#include "avsd/autograd.h"
#include "avsd/models.h"
#include "avsd/params.h"
#include "avsd/tensor.h"

namespace avsd {

// Inputs of one session as read from disk.
struct RawSession {
  std::string session_id;
  std::vector<std::string> speakers;
  Tensor features;                 // [T, n_mels]
  std::vector<Tensor> lip_features;  // per speaker [T_v, D_v]; empty = missing
};

// Everything the trainable part of the network consumes. The lip streams
// and enrollment embeddings come from frozen modules and are computed once.
struct SessionInputs {
  std::string session_id;
  std::vector<std::string> speakers;
  Tensor features;         // [T, n_mels]
  std::vector<Tensor> lips;  // per speaker [T, D_l + 1], last column validity
  Tensor utt;              // [S, D_u]
  std::vector<size_t> enroll_frames;  // frames used per speaker

  size_t num_frames() const { return features.rows(); }
  size_t num_speakers() const { return speakers.size(); }
};

struct EnrollmentConfig {
  double activity_threshold = 0.5;
  // Below this many visually single-speaker frames the enrollment falls back
  // to the frames with the largest activity margin over other speakers.
  size_t min_frames = 50;
  size_t fallback_frames = 200;
};

// Lip embeddings aligned to `num_frames` acoustic frames with a validity
// column; frames beyond the video are zero with validity 0.
Tensor AlignedLipEmbeddings(const ModelConfig& cfg, const ParameterStore& params,
                            const Tensor& lip_features, size_t num_frames);

// Lip activity head probabilities per video frame, [T_v].
std::vector<double> LipActivity(const ModelConfig& cfg,
                                const ParameterStore& params,
                                const Tensor& lip_features);

// Utterance embedding of an arbitrary feature matrix.
std::vector<double> ExtractEmbedding(const ModelConfig& cfg,
                                     const ParameterStore& params,
                                     const Tensor& features);

// Runs the frozen lip encoder and enrolls each speaker from the frames in
// which its lips alone are active.
SessionInputs PrepareSession(const ModelConfig& cfg,
                             const ParameterStore& params,
                             const RawSession& raw,
                             const EnrollmentConfig& enroll = {});

// Decoder probabilities for frames [start, start + length), recorded on
// `tape` so that it can be differentiated. Returns [S, length].
Var ForwardWindow(Tape& tape, ParameterStore& params, const ModelConfig& cfg,
                  const SessionInputs& in, size_t start, size_t length,
                  models::DecoderTrace* trace = nullptr);

// Inference-only variant; `params` is never modified.
Tensor PredictWindow(const ModelConfig& cfg, const ParameterStore& params,
                     const SessionInputs& in, size_t start, size_t length);

}  // namespace avsd

#endif  // AVSD_SESSION_H_
