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

#include "avsd/models.h"

#include <utility>

#include "avsd/common.h"

namespace avsd {

using nn::Scope;

EncoderKind ParseEncoderKind(const std::string& s) {
  if (s == "resnet_se") return EncoderKind::kResNetSE;
  if (s == "ecapa_tdnn") return EncoderKind::kEcapaTdnn;
  throw ConfigError("unknown encoder '" + s +
                    "' (expected resnet_se or ecapa_tdnn)");
}

DecoderKind ParseDecoderKind(const std::string& s) {
  if (s == "transformer") return DecoderKind::kTransformer;
  if (s == "conformer") return DecoderKind::kConformer;
  if (s == "cross_attention") return DecoderKind::kCrossAttention;
  throw ConfigError("unknown decoder '" + s +
                    "' (expected transformer, conformer or cross_attention)");
}

std::string ToString(EncoderKind k) {
  return k == EncoderKind::kResNetSE ? "resnet_se" : "ecapa_tdnn";
}

std::string ToString(DecoderKind k) {
  switch (k) {
    case DecoderKind::kTransformer:
      return "transformer";
    case DecoderKind::kConformer:
      return "conformer";
    case DecoderKind::kCrossAttention:
      return "cross_attention";
  }
  return "?";
}

EncoderConfig EncoderConfig::Toy(EncoderKind kind) {
  EncoderConfig c;
  c.kind = kind;
  c.preset = "toy";
  if (kind == EncoderKind::kResNetSE) {
    c.channels = {16, 32};
  } else {
    c.channels = {24, 24, 24};
  }
  c.se_channels = 8;
  c.embed_dim = 16;
  return c;
}

EncoderConfig EncoderConfig::Paper(EncoderKind kind) {
  EncoderConfig c;
  c.kind = kind;
  c.preset = "paper";
  if (kind == EncoderKind::kResNetSE) {
    c.channels = {32, 64, 128, 256};
    c.se_channels = 256;
    c.embed_dim = 128;
  } else {
    c.channels = {1024, 1024, 1024};
    c.se_channels = 128;
    c.embed_dim = 192;
  }
  return c;
}

void EncoderConfig::Validate() const {
  if (channels.empty()) throw ConfigError("encoder needs at least one stage");
  for (size_t c : channels) {
    if (c == 0) throw ConfigError("encoder channel count must be positive");
  }
  if (kind == EncoderKind::kEcapaTdnn) {
    for (size_t c : channels) {
      if (c != channels[0]) {
        throw ConfigError("ecapa_tdnn blocks must share one channel count");
      }
    }
  }
  if (se_channels == 0 || embed_dim == 0 || input_dim == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
}

size_t LipEncoderConfig::upsample() const {
  if (video_fps <= 0 || kFramesPerSecond % video_fps != 0) {
    throw ConfigError("video frame rate must divide " +
                      std::to_string(kFramesPerSecond));
  }
  return static_cast<size_t>(kFramesPerSecond / video_fps);
}

void LipEncoderConfig::Validate() const {
  upsample();
  if (input_dim == 0 || model_dim == 0 || ffn_dim == 0 || heads == 0 ||
      chunk_frames == 0) {
    throw ConfigError("lip encoder dimensions must be positive");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("lip encoder model_dim must be divisible by heads");
  }
  if (conv_kernel % 2 == 0) throw ConfigError("lip conv kernel must be odd");
}

void DecoderConfig::Validate() const {
  if (model_dim == 0 || heads == 0 || ffn_dim == 0 || layers == 0) {
    throw ConfigError("decoder dimensions must be positive");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("decoder model_dim (" + std::to_string(model_dim) +
                      ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  if (conv_kernel % 2 == 0) throw ConfigError("conv kernel must be odd");
  if (num_speakers == 0) throw ConfigError("num_speakers must be positive");
}

void ModelConfig::Validate() const {
  lip.Validate();
  speaker.Validate();
  decoder.Validate();
}

namespace models {

Var LipEncoderVideoRate(const Scope& s, const LipEncoderConfig& cfg,
                        const Var& lip_features) {
  if (lip_features.cols() != cfg.input_dim) {
    throw ShapeError("lip features have " +
                     std::to_string(lip_features.cols()) + " dims, expected " +
                     std::to_string(cfg.input_dim));
  }
  const Scope in = s.Sub("input");
  Var h = nn::Swish(nn::Conv1d(
      lip_features, in.Weight("w", cfg.conv_kernel * cfg.input_dim,
                              cfg.model_dim),
      in.Bias("b", cfg.model_dim), cfg.conv_kernel));
  for (size_t i = 0; i < cfg.layers; ++i) {
    h = nn::TransformerBlock(s.Sub("block" + std::to_string(i)), h, cfg.heads,
                             cfg.ffn_dim);
  }
  h = nn::LayerNormLayer(s.Sub("norm"), h);
  return nn::LinearLayer(s.Sub("out"), h, cfg.model_dim);
}

Var LipEncoderForward(const Scope& s, const LipEncoderConfig& cfg,
                      const Var& lip_features) {
  return nn::RepeatRows(LipEncoderVideoRate(s, cfg, lip_features),
                        cfg.upsample());
}

Var LipActivityHead(const Scope& s, const Var& video_embeddings) {
  return nn::Sigmoid(nn::LinearLayer(s.Sub("head"), video_embeddings, 1));
}

namespace {

Var ConvLayer(const Scope& s, const Var& x, size_t out, size_t k,
              size_t dilation = 1) {
  return nn::Conv1d(x, s.Weight("w", k * x.cols(), out), s.Bias("b", out), k,
                    dilation);
}

Var ResNetStack(const Scope& s, const EncoderConfig& cfg, Var h) {
  h = nn::Swish(ConvLayer(s.Sub("stem"), h, cfg.channels[0], 3));
  size_t in = cfg.channels[0];
  for (size_t i = 0; i < cfg.channels.size(); ++i) {
    const Scope b = s.Sub("block" + std::to_string(i));
    const size_t out = cfg.channels[i];
    Var skip = in == out ? h : nn::LinearLayer(b.Sub("proj"), h, out);
    Var y = nn::Swish(ConvLayer(b.Sub("conv1"), h, out, 3));
    y = ConvLayer(b.Sub("conv2"), y, out, 3);
    y = nn::SqueezeExcite(b.Sub("se"), y, cfg.se_channels);
    h = nn::Swish(nn::Add(y, skip));
    in = out;
  }
  return h;
}

Var EcapaStack(const Scope& s, const EncoderConfig& cfg, Var h) {
  const size_t c = cfg.channels[0];
  h = nn::Swish(ConvLayer(s.Sub("stem"), h, c, 5));
  std::vector<Var> outputs;
  for (size_t i = 0; i < cfg.channels.size(); ++i) {
    const Scope b = s.Sub("block" + std::to_string(i));
    const size_t dilation = i + 2;
    Var y = nn::Swish(nn::LinearLayer(b.Sub("pw1"), h, c));
    y = nn::Swish(ConvLayer(b.Sub("dil"), y, c, 3, dilation));
    y = nn::LinearLayer(b.Sub("pw2"), y, c);
    y = nn::SqueezeExcite(b.Sub("se"), y, cfg.se_channels);
    h = nn::Add(h, y);
    outputs.push_back(h);
  }
  // Multi-layer feature aggregation.
  return nn::Swish(nn::LinearLayer(s.Sub("mfa"), nn::ConcatCols(outputs),
                                   c * cfg.channels.size()));
}

}  // namespace

Var FrameStack(const Scope& s, const EncoderConfig& cfg, const Var& feats) {
  if (feats.cols() != cfg.input_dim) {
    throw ShapeError("features have " + std::to_string(feats.cols()) +
                     " dims, expected " + std::to_string(cfg.input_dim));
  }
  Var h = nn::LayerNormLayer(s.Sub("input_norm"), feats);
  return cfg.kind == EncoderKind::kResNetSE ? ResNetStack(s, cfg, h)
                                            : EcapaStack(s, cfg, h);
}

Var SpeakerEncoderFrame(const Scope& s, const EncoderConfig& cfg,
                        const Var& feats) {
  Var h = FrameStack(s.Sub("frame_stack"), cfg, feats);
  return nn::LinearLayer(s.Sub("frame_proj"), h, cfg.embed_dim);
}

Var SpeakerExtractorUtterance(const Scope& s, const EncoderConfig& cfg,
                              const Var& feats) {
  Var h = FrameStack(s.Sub("frame_stack"), cfg, feats);
  Var pooled = nn::MeanStdPool(h);
  return nn::L2NormalizeRows(
      nn::LinearLayer(s.Sub("embed"), pooled, cfg.embed_dim));
}

namespace {

// Binary head shared by all speaker streams.
Var SpeakerHead(const Scope& s, const Var& h) {
  Var logits = nn::LinearLayer(s.Sub("head"), nn::LayerNormLayer(s.Sub("final_norm"), h), 1);
  return nn::Transpose(nn::Sigmoid(logits));
}

Var SelfAttentionStream(const Scope& s, const DecoderConfig& cfg,
                        const Var& lip, const Var& frame_emb,
                        const Var& utt_row) {
  const size_t t = frame_emb.rows();
  Var x = nn::ConcatCols({lip, frame_emb, nn::BroadcastRows(utt_row, t)});
  Var h = nn::LinearLayer(s.Sub("input"), x, cfg.model_dim);
  for (size_t i = 0; i < cfg.layers; ++i) {
    const Scope b = s.Sub("block" + std::to_string(i));
    h = cfg.kind == DecoderKind::kConformer
            ? nn::ConformerBlock(b, h, cfg.heads, cfg.ffn_dim, cfg.conv_kernel)
            : nn::TransformerBlock(b, h, cfg.heads, cfg.ffn_dim);
  }
  return SpeakerHead(s, h);
}

Var CrossAttentionStream(const Scope& s, const DecoderConfig& cfg,
                         const Var& lip, const Var& frame_emb,
                         const Var& utt_row, DecoderTrace* trace) {
  const size_t d = cfg.model_dim;
  Var q = nn::LinearLayer(s.Sub("lip_proj"), lip, d);
  Var u = nn::LinearLayer(s.Sub("utt_proj"), utt_row, d);
  // Stage 1: lip queries attend to the single enrollment embedding.
  std::vector<Tensor>* w1 = trace ? &trace->stage1_weights : nullptr;
  Var h = nn::Add(q, nn::MultiHeadAttention(s.Sub("stage1"),
                                            nn::LayerNormLayer(s.Sub("ln1"), q),
                                            u, u, cfg.heads, w1));
  h = nn::Add(h, nn::FeedForward(s.Sub("ffn1"),
                                 nn::LayerNormLayer(s.Sub("ln1f"), h),
                                 cfg.ffn_dim));
  // Stage 2: the result attends over the frame-level speaker embeddings.
  Var f = nn::LinearLayer(s.Sub("frame_proj"), frame_emb, d);
  h = nn::Add(h, nn::MultiHeadAttention(s.Sub("stage2"),
                                        nn::LayerNormLayer(s.Sub("ln2"), h), f,
                                        f, cfg.heads));
  h = nn::Add(h, nn::FeedForward(s.Sub("ffn2"),
                                 nn::LayerNormLayer(s.Sub("ln2f"), h),
                                 cfg.ffn_dim));
  return SpeakerHead(s, h);
}

}  // namespace

Var DecoderForward(const Scope& s, const DecoderConfig& cfg,
                   const std::vector<Var>& lips, const Var& frame_emb,
                   const Var& utt, DecoderTrace* trace) {
  if (lips.empty()) throw ShapeError("decoder needs at least one speaker");
  if (lips.size() > cfg.num_speakers) {
    throw ShapeError("decoder configured for at most " +
                     std::to_string(cfg.num_speakers) + " speakers, got " +
                     std::to_string(lips.size()));
  }
  if (utt.rows() != lips.size()) {
    throw ShapeError("decoder got " + std::to_string(lips.size()) +
                     " lip streams but " + std::to_string(utt.rows()) +
                     " enrollment embeddings");
  }
  std::vector<Var> rows;
  rows.reserve(lips.size());
  for (size_t i = 0; i < lips.size(); ++i) {
    if (lips[i].rows() != frame_emb.rows()) {
      throw ShapeError("lip stream " + std::to_string(i) + " has " +
                       std::to_string(lips[i].rows()) + " frames, audio has " +
                       std::to_string(frame_emb.rows()));
    }
    Var u = nn::SliceRows(utt, i, 1);
    rows.push_back(cfg.kind == DecoderKind::kCrossAttention
                       ? CrossAttentionStream(s, cfg, lips[i], frame_emb, u,
                                              trace)
                       : SelfAttentionStream(s, cfg, lips[i], frame_emb, u));
  }
  return nn::ConcatRows(rows);
}

}  // namespace models

Tensor WithValidity(const Tensor& lip_embeddings, bool valid) {
  const size_t t = lip_embeddings.rows(), d = lip_embeddings.cols();
  Tensor out = Tensor::Matrix(t, d + 1);
  for (size_t r = 0; r < t; ++r) {
    for (size_t c = 0; c < d; ++c) {
      out.at(r, c) = valid ? lip_embeddings.at(r, c) : 0.0;
    }
    out.at(r, d) = valid ? 1.0 : 0.0;
  }
  return out;
}

ParameterStore InitParameters(const ModelConfig& cfg, uint64_t seed) {
  cfg.Validate();
  ParameterStore store(seed);
  store.set_allow_create(true);
  Tape tape(false);
  const Scope root(tape, store);
  const size_t t = 8;
  const size_t tv = 2;
  Var lip_in = tape.Constant(Tensor::Matrix(tv, cfg.lip.input_dim));
  Var video = models::LipEncoderVideoRate(root.Sub(kLipEncoder), cfg.lip,
                                          lip_in);
  models::LipActivityHead(root.Sub(kLipEncoder), video);
  Var feats = tape.Constant(Tensor::Matrix(t, cfg.speaker.input_dim));
  models::SpeakerExtractorUtterance(root.Sub(kSpeakerExtractor), cfg.speaker,
                                    feats);
  Var frame =
      models::SpeakerEncoderFrame(root.Sub(kSpeakerEncoder), cfg.speaker, feats);
  Var lip = tape.Constant(Tensor::Matrix(t, cfg.lip.model_dim + 1));
  Var utt = tape.Constant(Tensor::Matrix(1, cfg.speaker.embed_dim));
  models::DecoderForward(root.Sub(kDecoder), cfg.decoder, {lip}, frame, utt);
  store.set_allow_create(false);
  return store;
}

size_t TransferExtractorToEncoder(ParameterStore* params) {
  const std::string from = std::string(kSpeakerExtractor) + "/frame_stack/";
  const std::string to = std::string(kSpeakerEncoder) + "/frame_stack/";
  size_t copied = 0;
  for (const auto& name : params->NamesWithPrefix(from)) {
    const std::string target = to + name.substr(from.size());
    if (!params->Contains(target)) continue;
    const Tensor& src = params->Get(name);
    if (params->Get(target).shape() != src.shape()) continue;
    params->Set(target, src);
    ++copied;
  }
  return copied;
}

ParameterStore ExtractPrefix(const ParameterStore& params,
                             const std::string& prefix) {
  ParameterStore out(params.seed());
  out.Merge(params, prefix);
  return out;
}

}  // namespace avsd
