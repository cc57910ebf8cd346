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

// Command-line front end: synth, pretrain, train, decode, score, sv-correct
// and demo.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <glog/logging.h>

#include "CLI11.hpp"
#include "avsd/common.h"
#include "avsd/config.h"
#include "avsd/pipeline.h"
#include "avsd/wav.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace avsd;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  int jobs = 0;                        // 0 = keep config value
};

void AddCommon(CLI::App* cmd, CommonOptions* o, bool config_required) {
  auto* opt = cmd->add_option("--config", o->config_path,
                              "INI configuration file (see docs/config.md)");
  if (config_required) opt->required();
  cmd->add_option("--set", o->overrides,
                  "Override a config value, e.g. --set decode.threshold=0.4");
  cmd->add_option("--jobs", o->jobs, "Worker threads for session/window work")
      ->check(CLI::PositiveNumber);
}

PipelineConfig ResolveConfig(const CommonOptions& o) {
  PipelineConfig cfg = o.config_path.empty() ? DefaultPipelineConfig()
                                             : LoadPipelineConfig(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    SetConfigValue(&cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.jobs > 0) cfg.jobs = o.jobs;
  return cfg;
}

void RequirePath(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw MissingDataError(what + " not found: " + path);
}

std::vector<ManifestRecord> LoadRecords(const std::string& manifest,
                                        const std::string& split) {
  RequirePath(manifest, "manifest");
  auto records = SelectSplit(ReadManifest(manifest), split);
  if (records.empty()) {
    throw MissingDataError("manifest " + manifest + " has no '" + split +
                           "' sessions");
  }
  CheckRecordFiles(records);
  return records;
}

// Reads one RTTM file or every *.rttm file of a directory.
AnnotationMap ReadRttmSource(const std::string& path) {
  RequirePath(path, "RTTM source");
  AnnotationMap out;
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.path().extension() == ".rttm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  for (const auto& f : files) {
    for (auto& [sid, ann] : ReadRttmFile(f)) {
      auto& dst = out[sid];
      dst.session_id = sid;
      dst.entries.insert(dst.entries.end(), ann.entries.begin(),
                         ann.entries.end());
      dst.Normalize();
    }
  }
  return out;
}

nlohmann::json ReportToJson(const DerReport& r) {
  nlohmann::json j = {{"fa_pct", r.fa_pct},
                      {"miss_pct", r.miss_pct},
                      {"spkerr_pct", r.spkerr_pct},
                      {"der_pct", r.der_pct},
                      {"scored_speech_s", r.scored_speech_s},
                      {"fa_s", r.fa_s},
                      {"miss_s", r.miss_s},
                      {"spkerr_s", r.spkerr_s}};
  j["mapping"] = r.mapping;
  return j;
}

// ---- synth ----------------------------------------------------------------

struct SynthOptions {
  CommonOptions common;
  std::string out;
  int meetings = -1, speakers = -1;
  double duration = -1, overlap = -1, snr = -1e9;
  long long seed = -1;
};

int RunSynth(const SynthOptions& o) {
  PipelineConfig cfg = ResolveConfig(o.common);
  if (o.meetings > 0) cfg.corpus.num_meetings = o.meetings;
  if (o.speakers > 0) cfg.corpus.meeting.num_speakers = o.speakers;
  if (o.duration > 0) cfg.corpus.meeting.duration_s = o.duration;
  if (o.overlap >= 0) cfg.corpus.meeting.overlap_ratio = o.overlap;
  if (o.snr > -1e8) cfg.corpus.meeting.snr_db = o.snr;
  if (o.seed >= 0) cfg.corpus.seed = static_cast<uint64_t>(o.seed);
  cfg.Validate();
  CorpusOptions corpus = cfg.corpus;
  corpus.out_dir = o.out;
  const auto records = GenerateCorpus(corpus);
  std::cout << "wrote " << records.size() << " meetings to " << o.out
            << "/manifest.jsonl\n";
  return 0;
}

// ---- pretrain -------------------------------------------------------------

struct PretrainOptions {
  CommonOptions common;
  std::string manifest, out;
};

int RunPretrain(const PretrainOptions& o) {
  PipelineConfig cfg = ResolveConfig(o.common);
  cfg.Validate();
  const auto train = LoadRecords(o.manifest, "train");
  const ParameterStore p = RunPretraining(cfg, train, &std::cerr);
  p.Save(o.out);
  std::cout << "saved " << p.entries().size() << " tensors to " << o.out
            << "\n";
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainOptions {
  CommonOptions common;
  std::string manifest, pretrained, resume, out_dir;
  std::string decoder;
  bool frozen_encoder = false;
  int epochs = -1;
};

int RunTrain(const TrainOptions& o) {
  PipelineConfig cfg = ResolveConfig(o.common);
  if (!o.decoder.empty()) cfg.model.decoder.kind = ParseDecoderKind(o.decoder);
  if (o.frozen_encoder) cfg.train.joint_speaker_encoder = false;
  if (o.epochs >= 0) cfg.train.epochs = static_cast<size_t>(o.epochs);
  cfg.Validate();
  if (o.pretrained.empty() == o.resume.empty()) {
    throw ConfigError("train needs exactly one of --pretrained or --resume");
  }
  const auto train = LoadRecords(o.manifest, "train");
  TrainingState state;
  if (!o.resume.empty()) {
    RequirePath(o.resume, "checkpoint");
    state = LoadTrainingState(o.resume, cfg.train.adam);
  } else {
    RequirePath(o.pretrained, "pretrained checkpoint");
    state = InitJointState(cfg, LoadModelParameters(o.pretrained));
  }
  fs::create_directories(o.out_dir);
  std::ofstream(o.out_dir + "/config.ini") << RenderPipelineConfig(cfg);
  const auto data = LoadTrainingSessions(cfg, state.params, train);
  const std::string metrics_path = o.out_dir + "/metrics.csv";
  const bool fresh = !fs::exists(metrics_path) || o.resume.empty();
  std::ofstream metrics(metrics_path, fresh ? std::ios::trunc : std::ios::app);
  if (fresh) metrics << "step,loss,lr\n";
  JointTrain(
      cfg.model, cfg.train, data, &state,
      [&](size_t step, double loss, double lr) {
        metrics << step << "," << loss << "," << lr << "\n";
      },
      [&](const TrainingState& s) {
        const std::string path =
            o.out_dir + "/epoch" + std::to_string(s.epoch) + ".ckpt";
        SaveTrainingState(path, s);
        std::cerr << "epoch " << s.epoch << " -> " << path << "\n";
      });
  state.params.Save(o.out_dir + "/final.ckpt");
  std::cout << "saved " << o.out_dir << "/final.ckpt\n";
  return 0;
}

// ---- decode ---------------------------------------------------------------

struct DecodeOptions {
  CommonOptions common;
  std::string manifest, model, out_dir, split = "dev", probs_dir, decoder;
  long long chunk = -1, shift = -1, median = -1;
  double threshold = -1, min_segment = -1, min_gap = -1;
};

int RunDecode(const DecodeOptions& o) {
  PipelineConfig cfg = ResolveConfig(o.common);
  if (!o.decoder.empty()) cfg.model.decoder.kind = ParseDecoderKind(o.decoder);
  if (o.chunk > 0) cfg.decode.chunk_frames = static_cast<size_t>(o.chunk);
  if (o.shift > 0) cfg.decode.shift_frames = static_cast<size_t>(o.shift);
  if (o.median > 0) cfg.decode.median_kernel = static_cast<size_t>(o.median);
  if (o.threshold >= 0) cfg.decode.threshold = o.threshold;
  if (o.min_segment >= 0) cfg.decode.min_segment_s = o.min_segment;
  if (o.min_gap >= 0) cfg.decode.min_gap_s = o.min_gap;
  cfg.Validate();
  RequirePath(o.model, "model checkpoint");
  const auto records = LoadRecords(o.manifest, o.split);
  const ParameterStore params = LoadModelParameters(o.model);
  {
    // Fail before any decoding if the checkpoint does not fit the config.
    const ParameterStore shapes = InitParameters(cfg.model, 0);
    for (const auto& [name, t] : shapes.entries()) {
      if (!params.Contains(name) || params.Get(name).shape() != t.shape()) {
        throw ConfigError("checkpoint " + o.model +
                          " does not match the configured model at " + name);
      }
    }
  }
  fs::create_directories(o.out_dir);
  if (!o.probs_dir.empty()) fs::create_directories(o.probs_dir);
  for (const auto& r : records) {
    const auto in =
        PrepareSession(cfg.model, params, LoadRawSession(r), cfg.enroll);
    const auto probs = DecodeProbabilities(cfg.model, params, in, cfg.decode,
                                           static_cast<size_t>(cfg.jobs));
    if (!o.probs_dir.empty()) {
      WriteProbabilities(o.probs_dir + "/" + r.session + ".prob", probs);
    }
    const auto hyp =
        ProbabilitiesToAnnotation(probs, in.speakers, in.session_id, cfg.decode);
    const std::string path = o.out_dir + "/" + r.session + ".rttm";
    std::ofstream(path) << WriteRttm(hyp);
    std::cout << path << "\n";
  }
  return 0;
}

// ---- score ----------------------------------------------------------------

struct ScoreOptions {
  std::string ref, hyp, json_path, mapping = "identity";
  double collar = 0.0;
};

int RunScore(const ScoreOptions& o) {
  DerOptions opt;
  opt.collar_s = o.collar;
  opt.mapping = ParseSpeakerMapping(o.mapping);
  if (o.collar < 0) throw ConfigError("--collar must be >= 0");
  const AnnotationMap refs = ReadRttmSource(o.ref);
  const AnnotationMap hyps = ReadRttmSource(o.hyp);
  std::vector<DerReport> reports;
  nlohmann::json j;
  std::printf("%-16s %8s %8s %10s %8s %10s\n", "Session", "FA(%)", "MISS(%)",
              "SPKERR(%)", "DER(%)", "Speech(s)");
  auto print = [](const std::string& name, const DerReport& r) {
    std::printf("%-16s %8.2f %8.2f %10.2f %8.2f %10.2f\n", name.c_str(),
                r.fa_pct, r.miss_pct, r.spkerr_pct, r.der_pct,
                r.scored_speech_s);
  };
  for (const auto& [sid, ref] : refs) {
    DiarizationAnnotation hyp;
    hyp.session_id = sid;
    if (auto it = hyps.find(sid); it != hyps.end()) hyp = it->second;
    reports.push_back(ScoreDer(ref, hyp, opt));
    print(sid, reports.back());
    j["sessions"][sid] = ReportToJson(reports.back());
  }
  for (const auto& [sid, h] : hyps) {
    if (!refs.count(sid)) {
      std::cerr << "warning: hypothesis session " << sid
                << " has no reference; ignored\n";
    }
  }
  const DerReport total = AggregateReports(reports);
  print("OVERALL", total);
  j["overall"] = ReportToJson(total);
  j["collar_s"] = o.collar;
  j["mapping"] = o.mapping;
  if (o.json_path.empty()) {
    std::cout << "\n" << j.dump(2) << "\n";
  } else {
    std::ofstream(o.json_path) << j.dump(2) << "\n";
  }
  return 0;
}

// ---- sv-correct -----------------------------------------------------------

struct SvOptions {
  CommonOptions common;
  std::string rttm, audio_dir, model, out;
  double margin = -1;
};

int RunSvCorrect(const SvOptions& o) {
  PipelineConfig cfg = ResolveConfig(o.common);
  if (o.margin >= 0) cfg.sv.reassign_margin = o.margin;
  cfg.sv.jobs = cfg.jobs;
  cfg.Validate();
  RequirePath(o.model, "extractor checkpoint");
  RequirePath(o.audio_dir, "audio directory");
  const AnnotationMap in = ReadRttmSource(o.rttm);
  for (const auto& [sid, a] : in) {
    RequirePath(o.audio_dir + "/" + sid + ".wav", "audio for session " + sid);
  }
  const ParameterStore params = LoadModelParameters(o.model);
  const EmbeddingFn embed = MakeExtractorEmbedding(cfg.model, params);
  AnnotationMap out;
  for (const auto& [sid, a] : in) {
    const AudioSignal audio = ReadWav(o.audio_dir + "/" + sid + ".wav");
    const SvResult r = CorrectSpeakers(a, audio, embed, cfg.sv);
    std::cerr << sid << ": relabeled " << r.segments_relabeled << " of "
              << r.segments_checked << " single-speaker segments\n";
    out[sid] = r.annotation;
  }
  WriteRttmFile(o.out, out);
  return 0;
}

// ---- demo -----------------------------------------------------------------

struct DemoOptions {
  CommonOptions common;
  uint64_t seed = 0;
  std::string work_dir = "avsd_demo";
};

int RunDemoCmd(const DemoOptions& o) {
  PipelineConfig cfg = WithSeed(ResolveConfig(o.common), o.seed);
  cfg.Validate();
  const DemoReport report = RunDemo(cfg, o.work_dir, &std::cerr);
  std::cout << report.ToTable();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;
  CLI::App app{"Audio-visual speaker diarization toolkit"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  AddCommon(c_synth, &synth.common, false);
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--meetings", synth.meetings, "Number of meetings");
  c_synth->add_option("--speakers", synth.speakers, "Speakers per meeting");
  c_synth->add_option("--duration", synth.duration, "Meeting length (s)");
  c_synth->add_option("--overlap", synth.overlap, "Target overlap ratio");
  c_synth->add_option("--snr", synth.snr, "Signal-to-noise ratio (dB)");
  c_synth->add_option("--seed", synth.seed, "Corpus seed");

  PretrainOptions pre;
  auto* c_pre = app.add_subcommand(
      "pretrain", "Pretrain the utterance extractor and the lip encoder");
  AddCommon(c_pre, &pre.common, true);
  c_pre->add_option("--manifest", pre.manifest, "Corpus manifest")->required();
  c_pre->add_option("--out", pre.out, "Output checkpoint")->required();

  TrainOptions tr;
  auto* c_train = app.add_subcommand(
      "train", "Jointly train the speaker encoder and decoder");
  AddCommon(c_train, &tr.common, true);
  c_train->add_option("--manifest", tr.manifest, "Corpus manifest")->required();
  c_train->add_option("--pretrained", tr.pretrained, "Pretrained checkpoint");
  c_train->add_option("--resume", tr.resume, "Resume from an epoch checkpoint");
  c_train->add_option("--out-dir", tr.out_dir, "Checkpoint directory")
      ->required();
  c_train->add_option("--decoder", tr.decoder,
                      "transformer, conformer or cross_attention");
  c_train->add_option("--epochs", tr.epochs, "Total number of epochs");
  c_train->add_flag("--frozen-speaker-encoder", tr.frozen_encoder,
                    "Keep the speaker encoder fixed (ablation)");

  DecodeOptions dec;
  auto* c_dec = app.add_subcommand("decode", "Decode sessions to RTTM");
  AddCommon(c_dec, &dec.common, true);
  c_dec->add_option("--manifest", dec.manifest, "Corpus manifest")->required();
  c_dec->add_option("--model", dec.model, "Model checkpoint")->required();
  c_dec->add_option("--out-dir", dec.out_dir, "RTTM output directory")
      ->required();
  c_dec->add_option("--split", dec.split, "Manifest split to decode");
  c_dec->add_option("--decoder", dec.decoder,
                    "transformer, conformer or cross_attention");
  c_dec->add_option("--chunk", dec.chunk, "Window length in frames");
  c_dec->add_option("--shift", dec.shift, "Window shift in frames");
  c_dec->add_option("--median", dec.median, "Median kernel (odd, 1 = off)");
  c_dec->add_option("--threshold", dec.threshold, "Activity threshold");
  c_dec->add_option("--min-segment", dec.min_segment, "Minimum segment (s)");
  c_dec->add_option("--min-gap", dec.min_gap, "Gaps below this are merged (s)");
  c_dec->add_option("--probs-dir", dec.probs_dir,
                    "Also dump probability matrices here");

  ScoreOptions sc;
  auto* c_score = app.add_subcommand("score", "Diarization error rate");
  c_score->add_option("--ref", sc.ref, "Reference RTTM file or directory")
      ->required();
  c_score->add_option("--hyp", sc.hyp, "Hypothesis RTTM file or directory")
      ->required();
  c_score->add_option("--collar", sc.collar, "No-score collar (s)");
  c_score->add_option("--mapping", sc.mapping, "identity or optimal");
  c_score->add_option("--json", sc.json_path, "Write the JSON report here");

  SvOptions sv;
  auto* c_sv = app.add_subcommand(
      "sv-correct", "Re-check speaker labels of single-speaker segments");
  AddCommon(c_sv, &sv.common, false);
  c_sv->add_option("--rttm", sv.rttm, "Input RTTM")->required();
  c_sv->add_option("--audio", sv.audio_dir, "Directory with <session>.wav")
      ->required();
  c_sv->add_option("--model", sv.model, "Extractor checkpoint")->required();
  c_sv->add_option("--out", sv.out, "Output RTTM")->required();
  c_sv->add_option("--margin", sv.margin, "Cosine reassignment margin");

  CommonOptions show;
  auto* c_show = app.add_subcommand(
      "config", "Print the effective configuration as INI");
  AddCommon(c_show, &show, false);

  DemoOptions demo;
  auto* c_demo = app.add_subcommand(
      "demo", "Synthesize, train, decode and score end to end");
  AddCommon(c_demo, &demo.common, false);
  c_demo->add_option("--seed", demo.seed, "Seed for every stage");
  c_demo->add_option("--work-dir", demo.work_dir, "Scratch directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_synth) return RunSynth(synth);
    if (*c_pre) return RunPretrain(pre);
    if (*c_train) return RunTrain(tr);
    if (*c_dec) return RunDecode(dec);
    if (*c_score) return RunScore(sc);
    if (*c_sv) return RunSvCorrect(sv);
    if (*c_demo) return RunDemoCmd(demo);
    if (*c_show) {
      const PipelineConfig cfg = ResolveConfig(show);
      cfg.Validate();
      std::cout << RenderPipelineConfig(cfg);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const MissingDataError& e) {
    std::cerr << "missing data: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
