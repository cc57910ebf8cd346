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

#include "avsd/trainer.h"

#include <algorithm>
#include <cmath>

#include "avsd/common.h"
#include "avsd/layers.h"
#include "avsd/rng.h"

namespace avsd {

namespace {

constexpr char kAdamPrefix[] = "__adam__/";
constexpr char kExtractorHead[] = "extractor_head";

bool HasPrefix(const std::string& s, const std::string& p) {
  return s.compare(0, p.size(), p) == 0;
}

bool Matches(const std::string& name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes) {
    if (HasPrefix(name, p + "/")) return true;
  }
  return false;
}

}  // namespace

double BceLoss(const Tensor& probs, const Tensor& labels) {
  CheckSameShape(probs, labels, "bce_loss");
  if (probs.size() == 0) throw ShapeError("bce_loss: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], nn::kBceClamp, 1.0 - nn::kBceClamp);
    const double y = labels[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(probs.size());
}

void AdamConfig::Validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("adam eps must be > 0");
}

void Adam::Step(ParameterStore* params, const Gradients& grads,
                const std::vector<std::string>& trainable) {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (const auto& name : trainable) {
    auto it = grads.find(name);
    if (it == grads.end()) throw Error("adam: no gradient for " + name);
    const Tensor& g = it->second;
    Tensor& w = params->GetMutable(name);
    CheckSameShape(w, g, "adam step");
    if (!m_.Contains(name)) {
      m_.Set(name, Tensor(g.shape()));
      v_.Set(name, Tensor(g.shape()));
    }
    Tensor& m = m_.GetMutable(name);
    Tensor& v = v_.GetMutable(name);
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

void Adam::Restore(size_t step, ParameterStore m, ParameterStore v) {
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

void TrainConfig::Validate() const {
  adam.Validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (chunk_frames == 0) throw ConfigError("chunk_frames must be >= 1");
  if (steps_per_epoch == 0) throw ConfigError("steps_per_epoch must be >= 1");
  for (const auto& m : frozen_modules) {
    if (m != kLipEncoder && m != kSpeakerExtractor) {
      throw ConfigError("frozen module '" + m +
                        "' not in {lip_encoder, speaker_extractor}");
    }
  }
}

std::vector<std::string> TrainConfig::FrozenPrefixes() const {
  std::vector<std::string> out(frozen_modules.begin(), frozen_modules.end());
  if (!joint_speaker_encoder) out.push_back(kSpeakerEncoder);
  return out;
}

TrainingSession MakeTrainingSession(SessionInputs inputs,
                                    const DiarizationAnnotation& reference) {
  for (const auto& spk : reference.Speakers()) {
    if (std::find(inputs.speakers.begin(), inputs.speakers.end(), spk) ==
        inputs.speakers.end()) {
      throw Error(inputs.session_id + ": reference speaker " + spk +
                  " has no input stream");
    }
  }
  TrainingSession ts;
  ts.labels = AnnotationToLabels(reference, inputs.speakers, kFrameHopS,
                                 inputs.num_frames())
                  .labels;
  ts.inputs = std::move(inputs);
  return ts;
}

std::vector<BatchItem> SampleBatch(const std::vector<TrainingSession>& data,
                                   const TrainConfig& cfg, size_t epoch,
                                   size_t step) {
  if (data.empty()) throw Error("no training sessions");
  Rng rng(DeriveSeed(DeriveSeed(cfg.seed, epoch), step));
  std::vector<BatchItem> batch;
  for (size_t b = 0; b < cfg.batch_size; ++b) {
    BatchItem item;
    item.session = rng.Below(data.size());
    const size_t t = data[item.session].inputs.num_frames();
    item.length = std::min(cfg.chunk_frames, t);
    item.start = rng.Below(t - item.length + 1);
    batch.push_back(item);
  }
  return batch;
}

void SaveTrainingState(const std::string& path, const TrainingState& state) {
  ParameterStore out = state.params;
  for (const auto& [name, t] : state.adam.m().entries()) {
    out.Set(std::string(kAdamPrefix) + "m/" + name, t);
  }
  for (const auto& [name, t] : state.adam.v().entries()) {
    out.Set(std::string(kAdamPrefix) + "v/" + name, t);
  }
  out.Set(std::string(kAdamPrefix) + "meta",
          Tensor({3}, {static_cast<double>(state.adam.step()),
                       static_cast<double>(state.epoch),
                       static_cast<double>(state.global_step)}));
  out.Save(path);
}

TrainingState LoadTrainingState(const std::string& path,
                                const AdamConfig& adam) {
  const ParameterStore all = ParameterStore::Load(path);
  const std::string meta = std::string(kAdamPrefix) + "meta";
  if (!all.Contains(meta)) {
    throw Error(path + ": not a training checkpoint (no optimizer state)");
  }
  TrainingState st{ParameterStore(), Adam(adam), 0, 0};
  ParameterStore m, v;
  const std::string mp = std::string(kAdamPrefix) + "m/";
  const std::string vp = std::string(kAdamPrefix) + "v/";
  for (const auto& [name, t] : all.entries()) {
    if (HasPrefix(name, mp)) {
      m.Set(name.substr(mp.size()), t);
    } else if (HasPrefix(name, vp)) {
      v.Set(name.substr(vp.size()), t);
    } else if (!HasPrefix(name, kAdamPrefix)) {
      st.params.Set(name, t);
    }
  }
  const Tensor& mt = all.Get(meta);
  st.adam.Restore(static_cast<size_t>(mt[0]), std::move(m), std::move(v));
  st.epoch = static_cast<size_t>(mt[1]);
  st.global_step = static_cast<size_t>(mt[2]);
  return st;
}

ParameterStore LoadModelParameters(const std::string& path) {
  const ParameterStore all = ParameterStore::Load(path);
  ParameterStore out;
  for (const auto& [name, t] : all.entries()) {
    if (!HasPrefix(name, kAdamPrefix)) out.Set(name, t);
  }
  return out;
}

double BatchLoss(const ModelConfig& model, const TrainConfig& cfg,
                 ParameterStore* params,
                 const std::vector<TrainingSession>& data,
                 const std::vector<BatchItem>& batch, Gradients* grads,
                 std::vector<std::string>* trainable) {
  Tape tape(grads != nullptr);
  const auto frozen = cfg.FrozenPrefixes();
  tape.set_frozen_prefixes(frozen);
  std::vector<Var> losses;
  for (const auto& item : batch) {
    const auto& ts = data.at(item.session);
    Var probs = ForwardWindow(tape, *params, model, ts.inputs, item.start,
                              item.length);
    Tensor labels = Tensor::Matrix(ts.labels.rows(), item.length);
    for (size_t s = 0; s < labels.rows(); ++s) {
      for (size_t t = 0; t < item.length; ++t) {
        labels.at(s, t) = ts.labels.at(s, item.start + t);
      }
    }
    losses.push_back(nn::BceLoss(probs, labels));
  }
  Var total = losses[0];
  for (size_t i = 1; i < losses.size(); ++i) total = nn::Add(total, losses[i]);
  total = nn::Scale(total, 1.0 / static_cast<double>(losses.size()));
  if (grads) {
    *grads = tape.Backward(total, *params);
    if (trainable) {
      *trainable = tape.TrainableParamsSeen();
      for (const auto& name : *trainable) {
        if (Matches(name, frozen)) {
          throw Error("internal: gradient requested for frozen " + name);
        }
      }
    }
  }
  return total.value()[0];
}

void JointTrain(const ModelConfig& model, const TrainConfig& cfg,
                const std::vector<TrainingSession>& data, TrainingState* state,
                const StepCallback& on_step, const EpochCallback& on_epoch) {
  model.Validate();
  cfg.Validate();
  if (data.empty()) throw Error("joint training needs at least one session");
  state->params.set_allow_create(false);
  for (size_t epoch = state->epoch; epoch < cfg.epochs; ++epoch) {
    for (size_t step = 0; step < cfg.steps_per_epoch; ++step) {
      const auto batch = SampleBatch(data, cfg, epoch, step);
      Gradients grads;
      std::vector<std::string> trainable;
      const double loss = BatchLoss(model, cfg, &state->params, data, batch,
                                    &grads, &trainable);
      state->adam.Step(&state->params, grads, trainable);
      ++state->global_step;
      if (on_step) on_step(state->global_step, loss, cfg.adam.lr);
    }
    state->epoch = epoch + 1;
    if (on_epoch) on_epoch(*state);
  }
}

void PretrainConfig::Validate() const {
  adam.Validate();
  if (steps == 0 || batch_size == 0) {
    throw ConfigError("pretraining steps and batch size must be >= 1");
  }
}

std::vector<LabeledClip> ClipsFromSession(
    const Tensor& features, const DiarizationAnnotation& reference,
    const std::map<std::string, int>& identities, size_t clip_frames) {
  if (clip_frames == 0) throw ConfigError("clip_frames must be >= 1");
  const auto speakers = reference.Speakers();
  const size_t t = features.rows();
  const Tensor labels =
      AnnotationToLabels(reference, speakers, kFrameHopS, t).labels;
  std::vector<LabeledClip> clips;
  for (size_t s = 0; s < speakers.size(); ++s) {
    auto it = identities.find(speakers[s]);
    if (it == identities.end()) {
      throw Error("no identity for speaker " + speakers[s]);
    }
    // Frames where s is the only active speaker, cut into full clips.
    size_t run = 0;
    for (size_t f = 0; f <= t; ++f) {
      bool sole = f < t && labels.at(s, f) > 0.5;
      for (size_t o = 0; sole && o < speakers.size(); ++o) {
        if (o != s && labels.at(o, f) > 0.5) sole = false;
      }
      if (sole) {
        if (++run == clip_frames) {
          clips.push_back({features.RowSlice(f + 1 - clip_frames, clip_frames),
                           it->second});
          run = 0;
        }
      } else {
        run = 0;
      }
    }
  }
  return clips;
}

namespace {

// Draws batch indices for pretraining step `step`.
std::vector<size_t> PretrainBatch(size_t n, const PretrainConfig& p,
                                  size_t step) {
  std::vector<size_t> idx;
  Rng rng(DeriveSeed(p.seed ^ 0x5eedULL, step));
  for (size_t b = 0; b < p.batch_size; ++b) {
    idx.push_back(p.fixed_batch ? b % n : rng.Below(n));
  }
  return idx;
}

}  // namespace

ParameterStore PretrainExtractor(const EncoderConfig& cfg,
                                 const std::vector<LabeledClip>& clips,
                                 const PretrainConfig& pcfg,
                                 std::vector<double>* losses) {
  cfg.Validate();
  pcfg.Validate();
  std::map<int, int> classes;
  for (const auto& c : clips) classes.emplace(c.identity, 0);
  if (classes.size() < 2) {
    throw Error("extractor pretraining needs at least two speaker identities");
  }
  int next = 0;
  for (auto& [id, k] : classes) k = next++;

  ParameterStore params(DeriveSeed(pcfg.seed, HashString(kSpeakerExtractor)));
  Adam adam(pcfg.adam);
  for (size_t step = 0; step < pcfg.steps; ++step) {
    const auto idx = PretrainBatch(clips.size(), pcfg, step);
    params.set_allow_create(step == 0);
    Tape tape;
    nn::Scope root(tape, params);
    std::vector<Var> embs;
    std::vector<int> targets;
    for (size_t i : idx) {
      embs.push_back(models::SpeakerExtractorUtterance(
          root.Sub(kSpeakerExtractor), cfg, tape.Constant(clips[i].features)));
      targets.push_back(classes.at(clips[i].identity));
    }
    Var w = root.Sub(kExtractorHead).Weight("w", cfg.embed_dim, classes.size());
    Var logits = nn::Scale(nn::MatMul(nn::ConcatRows(embs), w),
                           pcfg.logit_scale);
    Var loss = nn::SoftmaxCrossEntropy(logits, targets);
    Gradients grads = tape.Backward(loss, params);
    adam.Step(&params, grads, tape.TrainableParamsSeen());
    if (losses) losses->push_back(loss.value()[0]);
  }
  return ExtractPrefix(params, std::string(kSpeakerExtractor) + "/");
}

std::vector<LipClip> LipClipsFromSession(const std::vector<Tensor>& lips,
                                         const Tensor& labels, size_t upsample,
                                         size_t clip_frames) {
  if (clip_frames == 0 || upsample == 0) {
    throw ConfigError("lip clip length and upsampling must be >= 1");
  }
  if (lips.size() != labels.rows()) {
    throw ShapeError("lip streams and label rows differ");
  }
  std::vector<LipClip> clips;
  const size_t t = labels.cols();
  for (size_t s = 0; s < lips.size(); ++s) {
    if (lips[s].empty()) continue;
    const size_t tv = std::min(lips[s].rows(), t / upsample);
    for (size_t b = 0; b + clip_frames <= tv; b += clip_frames) {
      LipClip c{lips[s].RowSlice(b, clip_frames),
                Tensor::Matrix(clip_frames, 1)};
      for (size_t v = 0; v < clip_frames; ++v) {
        double active = 0;
        for (size_t k = 0; k < upsample; ++k) {
          active += labels.at(s, (b + v) * upsample + k);
        }
        c.activity.at(v, 0) = 2.0 * active >= upsample ? 1.0 : 0.0;
      }
      clips.push_back(std::move(c));
    }
  }
  return clips;
}

ParameterStore PretrainLipEncoder(const LipEncoderConfig& cfg,
                                  const std::vector<LipClip>& clips,
                                  const PretrainConfig& pcfg,
                                  std::vector<double>* losses) {
  cfg.Validate();
  pcfg.Validate();
  if (clips.empty()) throw Error("lip pretraining needs at least one clip");
  ParameterStore params(DeriveSeed(pcfg.seed, HashString(kLipEncoder)));
  Adam adam(pcfg.adam);
  for (size_t step = 0; step < pcfg.steps; ++step) {
    const auto idx = PretrainBatch(clips.size(), pcfg, step);
    params.set_allow_create(step == 0);
    Tape tape;
    nn::Scope s(tape, params, kLipEncoder);
    std::vector<Var> terms;
    for (size_t i : idx) {
      Var p = models::LipActivityHead(
          s, models::LipEncoderVideoRate(s, cfg, tape.Constant(clips[i].lip)));
      terms.push_back(nn::BceLoss(p, clips[i].activity));
    }
    Var loss = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) loss = nn::Add(loss, terms[i]);
    loss = nn::Scale(loss, 1.0 / static_cast<double>(terms.size()));
    Gradients grads = tape.Backward(loss, params);
    adam.Step(&params, grads, tape.TrainableParamsSeen());
    if (losses) losses->push_back(loss.value()[0]);
  }
  params.set_allow_create(false);
  return params;
}

}  // namespace avsd
