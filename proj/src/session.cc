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

#include "avsd/session.h"

#include <algorithm>
#include <numeric>

#include "avsd/common.h"
#include "avsd/layers.h"

namespace avsd {

namespace {

// Scope needs a mutable store; with creation disabled no forward pass can
// modify it, so inference shares one const store across threads.
ParameterStore& ReadOnly(const ParameterStore& params) {
  if (params.allow_create()) {
    throw Error("inference requires a store with creation disabled");
  }
  return const_cast<ParameterStore&>(params);
}

}  // namespace

std::vector<double> LipActivity(const ModelConfig& cfg,
                                const ParameterStore& params,
                                const Tensor& lip_features) {
  std::vector<double> out;
  const size_t tv = lip_features.rows();
  for (size_t b = 0; b < tv; b += cfg.lip.chunk_frames) {
    const size_t n = std::min(cfg.lip.chunk_frames, tv - b);
    Tape tape(false);
    nn::Scope s(tape, ReadOnly(params), kLipEncoder);
    Var x = tape.Constant(lip_features.RowSlice(b, n));
    Var p = models::LipActivityHead(s, models::LipEncoderVideoRate(s, cfg.lip, x));
    for (size_t i = 0; i < n; ++i) out.push_back(p.value().at(i, 0));
  }
  return out;
}

Tensor AlignedLipEmbeddings(const ModelConfig& cfg, const ParameterStore& params,
                            const Tensor& lip_features, size_t num_frames) {
  const size_t d = cfg.lip.model_dim;
  const size_t up = cfg.lip.upsample();
  Tensor out = Tensor::Matrix(num_frames, d + 1);
  if (lip_features.empty()) return out;
  const size_t tv = lip_features.rows();
  for (size_t b = 0; b < tv && b * up < num_frames; b += cfg.lip.chunk_frames) {
    const size_t n = std::min(cfg.lip.chunk_frames, tv - b);
    Tape tape(false);
    nn::Scope s(tape, ReadOnly(params), kLipEncoder);
    Var e = models::LipEncoderForward(s, cfg.lip,
                                      tape.Constant(lip_features.RowSlice(b, n)));
    for (size_t r = 0; r < e.rows() && b * up + r < num_frames; ++r) {
      const size_t t = b * up + r;
      for (size_t c = 0; c < d; ++c) out.at(t, c) = e.value().at(r, c);
      out.at(t, d) = 1.0;
    }
  }
  return out;
}

std::vector<double> ExtractEmbedding(const ModelConfig& cfg,
                                     const ParameterStore& params,
                                     const Tensor& features) {
  if (features.empty() || features.rows() == 0) {
    throw ShapeError("cannot embed an empty feature matrix");
  }
  Tape tape(false);
  nn::Scope s(tape, ReadOnly(params), kSpeakerExtractor);
  Var e = models::SpeakerExtractorUtterance(s, cfg.speaker,
                                            tape.Constant(features));
  return e.value().vec();
}

SessionInputs PrepareSession(const ModelConfig& cfg,
                             const ParameterStore& params,
                             const RawSession& raw,
                             const EnrollmentConfig& enroll) {
  const size_t n_spk = raw.speakers.size();
  const size_t t = raw.features.rows();
  if (n_spk == 0) throw ShapeError(raw.session_id + ": no speakers");
  if (raw.lip_features.size() != n_spk) {
    throw ShapeError(raw.session_id + ": " +
                     std::to_string(raw.lip_features.size()) +
                     " lip streams for " + std::to_string(n_spk) +
                     " speakers");
  }
  if (t == 0) throw ShapeError(raw.session_id + ": no feature frames");
  SessionInputs in;
  in.session_id = raw.session_id;
  in.speakers = raw.speakers;
  in.features = raw.features;

  // Visual activity per acoustic frame; missing streams count as silent.
  const size_t up = cfg.lip.upsample();
  std::vector<std::vector<double>> act(n_spk, std::vector<double>(t, 0.0));
  for (size_t s = 0; s < n_spk; ++s) {
    in.lips.push_back(AlignedLipEmbeddings(cfg, params, raw.lip_features[s], t));
    if (raw.lip_features[s].empty()) continue;
    const auto p = LipActivity(cfg, params, raw.lip_features[s]);
    for (size_t f = 0; f < t && f / up < p.size(); ++f) act[s][f] = p[f / up];
  }

  const size_t d = cfg.speaker.embed_dim;
  in.utt = Tensor::Matrix(n_spk, d);
  for (size_t s = 0; s < n_spk; ++s) {
    std::vector<size_t> frames;
    std::vector<double> margin(t);
    for (size_t f = 0; f < t; ++f) {
      double other = 0.0;
      for (size_t o = 0; o < n_spk; ++o) {
        if (o != s) other = std::max(other, act[o][f]);
      }
      margin[f] = act[s][f] - other;
      if (act[s][f] >= enroll.activity_threshold &&
          other < enroll.activity_threshold) {
        frames.push_back(f);
      }
    }
    if (frames.size() < enroll.min_frames) {
      frames.resize(t);
      std::iota(frames.begin(), frames.end(), size_t{0});
      std::stable_sort(frames.begin(), frames.end(), [&](size_t a, size_t b) {
        return margin[a] > margin[b];
      });
      frames.resize(std::min(t, enroll.fallback_frames));
      std::sort(frames.begin(), frames.end());
    }
    Tensor sel = Tensor::Matrix(frames.size(), raw.features.cols());
    for (size_t i = 0; i < frames.size(); ++i) {
      for (size_t c = 0; c < sel.cols(); ++c) {
        sel.at(i, c) = raw.features.at(frames[i], c);
      }
    }
    const auto e = ExtractEmbedding(cfg, params, sel);
    for (size_t c = 0; c < d; ++c) in.utt.at(s, c) = e[c];
    in.enroll_frames.push_back(frames.size());
  }
  return in;
}

Var ForwardWindow(Tape& tape, ParameterStore& params, const ModelConfig& cfg,
                  const SessionInputs& in, size_t start, size_t length,
                  models::DecoderTrace* trace) {
  if (length == 0 || start + length > in.num_frames()) {
    throw ShapeError("window [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside session of " +
                     std::to_string(in.num_frames()) + " frames");
  }
  nn::Scope root(tape, params);
  Var feats = tape.Constant(in.features.RowSlice(start, length));
  Var frame = models::SpeakerEncoderFrame(root.Sub(kSpeakerEncoder),
                                          cfg.speaker, feats);
  std::vector<Var> lips;
  for (const auto& l : in.lips) {
    lips.push_back(tape.Constant(l.RowSlice(start, length)));
  }
  return models::DecoderForward(root.Sub(kDecoder), cfg.decoder, lips, frame,
                                tape.Constant(in.utt), trace);
}

Tensor PredictWindow(const ModelConfig& cfg, const ParameterStore& params,
                     const SessionInputs& in, size_t start, size_t length) {
  Tape tape(false);
  return ForwardWindow(tape, ReadOnly(params), cfg, in, start, length).value();
}

}  // namespace avsd
