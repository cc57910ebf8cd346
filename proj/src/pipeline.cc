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

#include "avsd/pipeline.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "avsd/binary_io.h"
#include "avsd/common.h"
#include "avsd/dsp.h"
#include "avsd/rng.h"
#include "avsd/wav.h"
#include "json.hpp"

namespace avsd {

namespace fs = std::filesystem;

namespace {

void RequireFile(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw MissingDataError(what + " not found: " + path);
  }
}

DerReport ScoreAll(const std::vector<DiarizationAnnotation>& refs,
                   const std::vector<DiarizationAnnotation>& hyps,
                   const DerOptions& options) {
  std::vector<DerReport> reports;
  for (size_t i = 0; i < refs.size(); ++i) {
    reports.push_back(ScoreDer(refs[i], hyps[i], options));
  }
  return AggregateReports(reports);
}

void Log(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << std::endl;
}

nlohmann::json ReportJson(const DerReport& r) {
  return {{"fa_pct", r.fa_pct},         {"miss_pct", r.miss_pct},
          {"spkerr_pct", r.spkerr_pct}, {"der_pct", r.der_pct},
          {"scored_speech_s", r.scored_speech_s}};
}

}  // namespace

RawSession LoadRawSession(const ManifestRecord& record) {
  RequireFile(record.features, "feature file");
  RawSession raw;
  raw.session_id = record.session;
  raw.speakers = record.speakers;
  raw.features = ReadFeatures(record.features).values;
  if (record.lips.size() != record.speakers.size()) {
    throw Error(record.session + ": " + std::to_string(record.lips.size()) +
                " lip files for " + std::to_string(record.speakers.size()) +
                " speakers");
  }
  for (const auto& path : record.lips) {
    if (path.empty()) {
      raw.lip_features.emplace_back();  // occluded speaker
      continue;
    }
    RequireFile(path, "lip feature file");
    raw.lip_features.push_back(ReadLipFeatures(path));
  }
  return raw;
}

DiarizationAnnotation LoadReference(const ManifestRecord& record) {
  RequireFile(record.rttm, "reference RTTM");
  const auto all = ReadRttmFile(record.rttm);
  auto it = all.find(record.session);
  if (it != all.end()) return it->second;
  DiarizationAnnotation empty;
  empty.session_id = record.session;
  return empty;
}

AudioSignal LoadAudio(const ManifestRecord& record) {
  RequireFile(record.wav, "audio file");
  return ReadWav(record.wav);
}

std::vector<ManifestRecord> SelectSplit(const std::vector<ManifestRecord>& all,
                                        const std::string& split) {
  std::vector<ManifestRecord> out;
  for (const auto& r : all) {
    if (split.empty() || r.split == split) out.push_back(r);
  }
  return out;
}

void CheckRecordFiles(const std::vector<ManifestRecord>& records) {
  for (const auto& r : records) {
    RequireFile(r.features, "feature file");
    RequireFile(r.rttm, "reference RTTM");
    RequireFile(r.wav, "audio file");
    for (const auto& l : r.lips) {
      if (!l.empty()) RequireFile(l, "lip feature file");
    }
  }
}

ParameterStore RunPretraining(const PipelineConfig& cfg,
                              const std::vector<ManifestRecord>& train,
                              std::ostream* log) {
  if (train.empty()) throw Error("pretraining needs training sessions");
  std::vector<LabeledClip> clips;
  std::vector<LipClip> lip_clips;
  for (const auto& r : train) {
    const RawSession raw = LoadRawSession(r);
    const auto ref = LoadReference(r);
    std::map<std::string, int> ids;
    for (size_t i = 0; i < r.speakers.size(); ++i) {
      ids[r.speakers[i]] =
          i < r.speaker_ids.size() ? r.speaker_ids[i] : static_cast<int>(i);
    }
    auto c = ClipsFromSession(raw.features, ref, ids, cfg.extractor_clip_frames);
    clips.insert(clips.end(), c.begin(), c.end());
    const Tensor labels = AnnotationToLabels(ref, r.speakers, kFrameHopS,
                                             raw.features.rows())
                              .labels;
    auto l = LipClipsFromSession(raw.lip_features, labels,
                                 cfg.model.lip.upsample(),
                                 cfg.model.lip.chunk_frames);
    lip_clips.insert(lip_clips.end(), l.begin(), l.end());
  }
  Log(log, "pretrain: " + std::to_string(clips.size()) + " speaker clips, " +
               std::to_string(lip_clips.size()) + " lip clips");
  std::vector<double> losses;
  ParameterStore out =
      PretrainExtractor(cfg.model.speaker, clips, cfg.pretrain_extractor, &losses);
  Log(log, "pretrain extractor: loss " + std::to_string(losses.front()) +
               " -> " + std::to_string(losses.back()));
  losses.clear();
  const ParameterStore lip =
      PretrainLipEncoder(cfg.model.lip, lip_clips, cfg.pretrain_lip, &losses);
  Log(log, "pretrain lip encoder: loss " + std::to_string(losses.front()) +
               " -> " + std::to_string(losses.back()));
  out.Merge(lip);
  return out;
}

TrainingState InitJointState(const PipelineConfig& cfg,
                             const ParameterStore& pretrained) {
  TrainingState st;
  st.params = InitParameters(cfg.model, DeriveSeed(cfg.train.seed, 1));
  for (const auto& [name, t] : pretrained.entries()) {
    if (!st.params.Contains(name)) {
      throw ConfigError("pretrained parameter " + name +
                        " does not exist in the configured model");
    }
    if (st.params.Get(name).shape() != t.shape()) {
      throw ConfigError("pretrained parameter " + name + " has shape " +
                        ShapeToString(t.shape()) + ", model expects " +
                        ShapeToString(st.params.Get(name).shape()));
    }
    st.params.Set(name, t);
  }
  TransferExtractorToEncoder(&st.params);
  st.adam = Adam(cfg.train.adam);
  return st;
}

std::vector<TrainingSession> LoadTrainingSessions(
    const PipelineConfig& cfg, const ParameterStore& params,
    const std::vector<ManifestRecord>& records) {
  std::vector<TrainingSession> out;
  for (const auto& r : records) {
    out.push_back(MakeTrainingSession(
        PrepareSession(cfg.model, params, LoadRawSession(r), cfg.enroll),
        LoadReference(r)));
  }
  return out;
}

ActivityProbabilityMatrix DecodeProbabilities(const ModelConfig& model,
                                              const ParameterStore& params,
                                              const SessionInputs& in,
                                              const DecodeConfig& cfg,
                                              size_t jobs) {
  const WindowPredictor predict = [&](size_t start, size_t length) {
    return PredictWindow(model, params, in, start, length);
  };
  return SlidingWindowDecode(predict, in.num_frames(), cfg, jobs);
}

DiarizationAnnotation ProbabilitiesToAnnotation(
    const ActivityProbabilityMatrix& probs,
    const std::vector<std::string>& speakers, const std::string& session_id,
    const DecodeConfig& cfg) {
  const ActivityProbabilityMatrix smooth =
      cfg.median_kernel > 1 ? MedianFilter(probs, cfg.median_kernel) : probs;
  return SegmentsToAnnotation(ThresholdToSegments(smooth, cfg), speakers,
                              session_id);
}

EmbeddingFn MakeExtractorEmbedding(const ModelConfig& model,
                                   const ParameterStore& params) {
  return [&model, &params](const AudioSignal& audio) {
    const auto feats =
        LogMel(audio, static_cast<int>(model.speaker.input_dim));
    return ExtractEmbedding(model, params, feats.values);
  };
}

PipelineConfig WithSeed(PipelineConfig cfg, uint64_t seed) {
  cfg.corpus.seed = seed;
  cfg.train.seed = seed;
  cfg.pretrain_extractor.seed = seed;
  cfg.pretrain_lip.seed = seed;
  return cfg;
}

std::string DemoReport::ToTable() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  auto line = [&](const std::string& name, const DerReport& r) {
    os << std::left << std::setw(26) << name << std::right << std::setw(8)
       << r.fa_pct << std::setw(9) << r.miss_pct << std::setw(11)
       << r.spkerr_pct << std::setw(8) << r.der_pct << "\n";
  };
  os << std::left << std::setw(26) << "System" << std::right << std::setw(8)
     << "FA(%)" << std::setw(9) << "MISS(%)" << std::setw(11) << "SPKERR(%)"
     << std::setw(8) << "DER(%)" << "\n";
  for (const auto& row : rows) line(row.name, row.report);
  line("untrained", untrained);
  line("corrupted labels", corrupted);
  line("corrupted + secondary SV", corrupted_corrected);
  os << "SV restoration: " << restoration.restored << "/"
     << restoration.corrupted << " corrupted restored, "
     << restoration.disturbed << "/" << restoration.clean
     << " clean disturbed\n";
  os << std::setprecision(1) << "seed " << seed << ", " << seconds << " s\n";
  return os.str();
}

std::string DemoReport::ToJson() const {
  nlohmann::json j;
  j["seed"] = seed;
  for (const auto& row : rows) j["rows"].push_back({{"name", row.name},
                                                   {"score", ReportJson(row.report)}});
  j["untrained"] = ReportJson(untrained);
  j["corrupted"] = ReportJson(corrupted);
  j["corrupted_corrected"] = ReportJson(corrupted_corrected);
  j["restoration"] = {{"corrupted", restoration.corrupted},
                      {"restored", restoration.restored},
                      {"clean", restoration.clean},
                      {"disturbed", restoration.disturbed}};
  j["final_train_loss"] = final_train_loss;
  j["seconds"] = seconds;
  return j.dump(2);
}

DemoReport RunDemo(const PipelineConfig& cfg, const std::string& work_dir,
                   std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.Validate();
  const std::string model_dir = work_dir + "/model";
  fs::create_directories(model_dir);
  DemoReport report;
  report.seed = cfg.corpus.seed;
  std::string stage = "synth";
  try {
    CorpusOptions corpus = cfg.corpus;
    corpus.out_dir = work_dir + "/corpus";
    const auto records = GenerateCorpus(corpus);
    const auto train = SelectSplit(records, "train");
    const auto dev = SelectSplit(records, "dev");
    if (train.empty() || dev.empty()) {
      throw ConfigError("demo needs both train and dev meetings");
    }
    {
      std::ofstream(model_dir + "/config.ini") << RenderPipelineConfig(cfg);
    }

    stage = "pretrain";
    const ParameterStore pretrained = RunPretraining(cfg, train, log);
    pretrained.Save(model_dir + "/pretrained.ckpt");

    stage = "train";
    TrainingState state = InitJointState(cfg, pretrained);
    const auto data = LoadTrainingSessions(cfg, state.params, train);
    std::ofstream metrics(model_dir + "/metrics.csv");
    metrics << "step,loss,lr\n";
    std::vector<double> epoch_losses;
    JointTrain(
        cfg.model, cfg.train, data, &state,
        [&](size_t step, double loss, double lr) {
          metrics << step << "," << loss << "," << lr << "\n";
          epoch_losses.push_back(loss);
        },
        [&](const TrainingState& s) {
          double mean = 0;
          for (double l : epoch_losses) mean += l;
          mean /= static_cast<double>(epoch_losses.size());
          report.final_train_loss = mean;
          epoch_losses.clear();
          Log(log, "train: epoch " + std::to_string(s.epoch) + " mean loss " +
                       std::to_string(mean));
          SaveTrainingState(
              model_dir + "/epoch" + std::to_string(s.epoch) + ".ckpt", s);
        });
    state.params.Save(model_dir + "/final.ckpt");

    stage = "decode";
    const ParameterStore& params = state.params;
    std::vector<DiarizationAnnotation> refs;
    std::vector<SessionInputs> inputs;
    std::vector<AudioSignal> audio;
    for (const auto& r : dev) {
      refs.push_back(LoadReference(r));
      inputs.push_back(
          PrepareSession(cfg.model, params, LoadRawSession(r), cfg.enroll));
      audio.push_back(LoadAudio(r));
    }
    DecodeConfig base = cfg.decode;
    base.shift_frames = base.chunk_frames;
    base.median_kernel = 1;
    DecodeConfig shifted = cfg.decode;
    shifted.median_kernel = 1;
    const DecodeConfig& full = cfg.decode;
    const size_t jobs = static_cast<size_t>(cfg.jobs);

    std::vector<DiarizationAnnotation> h_base, h_shift, h_median, h_sv;
    const EmbeddingFn embed = MakeExtractorEmbedding(cfg.model, params);
    SvConfig sv = cfg.sv;
    sv.jobs = cfg.jobs;
    for (size_t i = 0; i < dev.size(); ++i) {
      const auto& in = inputs[i];
      const auto p_base = DecodeProbabilities(cfg.model, params, in, base, jobs);
      h_base.push_back(
          ProbabilitiesToAnnotation(p_base, in.speakers, in.session_id, base));
      const auto p_shift =
          DecodeProbabilities(cfg.model, params, in, shifted, jobs);
      h_shift.push_back(ProbabilitiesToAnnotation(p_shift, in.speakers,
                                                  in.session_id, shifted));
      h_median.push_back(
          ProbabilitiesToAnnotation(p_shift, in.speakers, in.session_id, full));
      stage = "secondary-sv";
      h_sv.push_back(CorrectSpeakers(h_median.back(), audio[i], embed, sv)
                         .annotation);
      stage = "decode";
    }
    const std::string shift_name =
        "+ shift " + std::to_string(cfg.decode.shift_frames);
    const std::vector<std::pair<std::string, std::vector<DiarizationAnnotation>*>>
        variants = {{"base (shift " + std::to_string(cfg.decode.chunk_frames) +
                         ")",
                     &h_base},
                    {shift_name, &h_shift},
                    {"+ median filtering", &h_median},
                    {"+ secondary SV", &h_sv}};
    for (const auto& [name, hyps] : variants) {
      report.rows.push_back({name, ScoreAll(refs, *hyps, cfg.score)});
      const std::string dir = work_dir + "/hyp/" +
                              std::to_string(report.rows.size() - 1);
      fs::create_directories(dir);
      for (const auto& h : *hyps) {
        std::ofstream(dir + "/" + h.session_id + ".rttm") << WriteRttm(h);
      }
    }

    stage = "untrained";
    {
      ParameterStore random =
          InitParameters(cfg.model, DeriveSeed(cfg.train.seed, 0xdead));
      std::vector<DiarizationAnnotation> hyps;
      for (size_t i = 0; i < dev.size(); ++i) {
        const auto in = PrepareSession(cfg.model, random, LoadRawSession(dev[i]),
                                       cfg.enroll);
        hyps.push_back(ProbabilitiesToAnnotation(
            DecodeProbabilities(cfg.model, random, in, full, jobs), in.speakers,
            in.session_id, full));
      }
      report.untrained = ScoreAll(refs, hyps, cfg.score);
    }

    stage = "secondary-sv";
    std::vector<DiarizationAnnotation> corrupted, corrected;
    for (size_t i = 0; i < dev.size(); ++i) {
      const uint64_t s = DeriveSeed(cfg.corpus.seed, 1000 + i);
      const Corruption hyp_c =
          CorruptSingleSpeakerLabels(h_median[i], 0.1, s, sv.min_segment_s);
      corrupted.push_back(hyp_c.annotation);
      corrected.push_back(
          CorrectSpeakers(hyp_c.annotation, audio[i], embed, sv).annotation);
      const Corruption ref_c =
          CorruptSingleSpeakerLabels(refs[i], 0.1, s ^ 1, sv.min_segment_s);
      const auto fixed = CorrectSpeakers(ref_c.annotation, audio[i], embed, sv);
      const auto st = EvaluateRestoration(ref_c, fixed.annotation);
      report.restoration.corrupted += st.corrupted;
      report.restoration.restored += st.restored;
      report.restoration.clean += st.clean;
      report.restoration.disturbed += st.disturbed;
    }
    report.corrupted = ScoreAll(refs, corrupted, cfg.score);
    report.corrupted_corrected = ScoreAll(refs, corrected, cfg.score);
  } catch (const ConfigError& e) {
    throw ConfigError("demo stage '" + stage + "' failed: " + e.what());
  } catch (const MissingDataError& e) {
    throw MissingDataError("demo stage '" + stage + "' failed: " + e.what());
  } catch (const std::exception& e) {
    throw Error("demo stage '" + stage + "' failed: " + e.what());
  }
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  std::ofstream(work_dir + "/report.json") << report.ToJson() << "\n";
  return report;
}

}  // namespace avsd
