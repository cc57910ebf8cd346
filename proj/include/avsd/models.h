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

#ifndef AVSD_MODELS_H_
#define AVSD_MODELS_H_

#include <string>
#include <vector>

#include "avsd/autograd.h"
#include "avsd/layers.h"
#include "avsd/params.h"
#include "avsd/tensor.h"

namespace avsd {

// Parameter-name prefixes of the four networks in a model bundle.
inline constexpr char kLipEncoder[] = "lip_encoder";
inline constexpr char kSpeakerExtractor[] = "speaker_extractor";
inline constexpr char kSpeakerEncoder[] = "speaker_encoder";
inline constexpr char kDecoder[] = "decoder";

enum class EncoderKind { kResNetSE, kEcapaTdnn };
enum class DecoderKind { kTransformer, kConformer, kCrossAttention };

EncoderKind ParseEncoderKind(const std::string& s);
DecoderKind ParseDecoderKind(const std::string& s);
std::string ToString(EncoderKind k);
std::string ToString(DecoderKind k);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kResNetSE;
  // ResNet-SE: channels of the residual stages. ECAPA-TDNN: one entry per
  // dilated block (all equal).
  std::vector<size_t> channels = {16, 32};
  size_t se_channels = 8;
  size_t embed_dim = 16;
  size_t input_dim = 80;
  std::string preset = "toy";

  static EncoderConfig Toy(EncoderKind kind);
  // Full-size configurations; legal but slow at this scale.
  static EncoderConfig Paper(EncoderKind kind);
  void Validate() const;
};

struct LipEncoderConfig {
  size_t input_dim = 16;
  size_t model_dim = 16;
  size_t heads = 2;
  size_t ffn_dim = 32;
  size_t layers = 2;
  size_t conv_kernel = 3;
  int video_fps = 25;
  // Inference runs over non-overlapping chunks of this many video frames,
  // matching the pretraining window.
  size_t chunk_frames = 150;

  size_t upsample() const;  // 100 / video_fps; throws if not integral
  void Validate() const;
};

struct DecoderConfig {
  DecoderKind kind = DecoderKind::kTransformer;
  size_t layers = 2;
  size_t heads = 2;
  size_t model_dim = 16;
  size_t ffn_dim = 32;
  size_t conv_kernel = 7;
  size_t num_speakers = 3;  // most speakers a session may have

  void Validate() const;
};

struct ModelConfig {
  LipEncoderConfig lip;
  EncoderConfig speaker;
  DecoderConfig decoder;

  void Validate() const;
};

namespace models {

// Lip encoder: conv + self-attention stack over video-rate features, each
// output row repeated upsample() times to reach the acoustic frame rate.
// Input [T_v, input_dim] -> [T_v * upsample, model_dim].
Var LipEncoderForward(const nn::Scope& s, const LipEncoderConfig& cfg,
                      const Var& lip_features);
// Video-rate embeddings before upsampling, [T_v, model_dim].
Var LipEncoderVideoRate(const nn::Scope& s, const LipEncoderConfig& cfg,
                        const Var& lip_features);
// Per-video-frame activity probability head used for pretraining and for
// visually guided enrollment, [T_v, 1].
Var LipActivityHead(const nn::Scope& s, const Var& video_embeddings);

// Shared convolutional front end of the speaker extractor and encoder,
// [T, input_dim] -> [T, C].
Var FrameStack(const nn::Scope& s, const EncoderConfig& cfg, const Var& feats);
// Frame-level speaker embeddings, [T, embed_dim].
Var SpeakerEncoderFrame(const nn::Scope& s, const EncoderConfig& cfg,
                        const Var& feats);
// Utterance-level L2-normalized embedding, [1, embed_dim].
Var SpeakerExtractorUtterance(const nn::Scope& s, const EncoderConfig& cfg,
                              const Var& feats);

struct DecoderTrace {
  // Cross-attention stage-1 weights, one [T, 1] matrix per head per speaker.
  std::vector<Tensor> stage1_weights;
};

// lips: per speaker [T, lip_dim + 1] (last column = stream validity);
// frame_emb: [T, D]; utt: [S, D_u]. Returns activity probabilities [S, T].
Var DecoderForward(const nn::Scope& s, const DecoderConfig& cfg,
                   const std::vector<Var>& lips, const Var& frame_emb,
                   const Var& utt, DecoderTrace* trace = nullptr);

}  // namespace models

// Appends the validity column: 1 for a real stream, 0 for a missing one
// (whose embedding rows must already be zero).
Tensor WithValidity(const Tensor& lip_embeddings, bool valid);

// Creates every parameter of the bundle deterministically from `seed`.
ParameterStore InitParameters(const ModelConfig& cfg, uint64_t seed);

// Copies speaker_extractor/frame_stack/* onto speaker_encoder/frame_stack/*
// where shapes match. Returns the number of tensors copied.
size_t TransferExtractorToEncoder(ParameterStore* params);

// Returns a copy of the parameters whose names start with `prefix`.
ParameterStore ExtractPrefix(const ParameterStore& params,
                             const std::string& prefix);

}  // namespace avsd

#endif  // AVSD_MODELS_H_
