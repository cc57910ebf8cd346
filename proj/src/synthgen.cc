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

#include "avsd/synthgen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "avsd/binary_io.h"
#include "avsd/common.h"
#include "avsd/rng.h"
#include "avsd/wav.h"
#include "json.hpp"

namespace avsd {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxAttempts = 200;
constexpr double kOverlapTolerance = 0.03;
constexpr double kRampS = 0.020;
constexpr double kMinTalkS = 0.3;
constexpr double kMinSilenceS = 0.2;

// Speaking probability p such that P(>=2 active) / P(>=1 active) equals the
// target for S independent speakers.
double SpeakingProbability(int S, double target) {
  if (S < 2 || target <= 0) return 0.5;
  auto ratio = [S](double p) {
    double none = std::pow(1 - p, S);
    double one = S * p * std::pow(1 - p, S - 1);
    return (1 - none - one) / (1 - none);
  };
  double lo = 1e-4, hi = 0.999;
  for (int i = 0; i < 100; ++i) {
    double mid = 0.5 * (lo + hi);
    (ratio(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Alternating talk/silence renewal process on the 10 ms grid.
std::vector<uint8_t> SpeakerActivity(Rng& rng, size_t frames, double p,
                                     double mean_turn_s) {
  double mean_sil = std::max(mean_turn_s * (1 - p) / p, kMinSilenceS + 0.05);
  std::vector<uint8_t> act(frames, 0);
  bool talking = rng.Uniform() < p;
  size_t t = 0;
  while (t < frames) {
    double d = talking
                   ? kMinTalkS + rng.Exponential(mean_turn_s - kMinTalkS)
                   : kMinSilenceS + rng.Exponential(mean_sil - kMinSilenceS);
    size_t n = std::max<size_t>(1, static_cast<size_t>(std::lround(d * 100)));
    size_t end = std::min(frames, t + n);
    if (talking) std::fill(act.begin() + t, act.begin() + end, 1);
    t = end;
    talking = !talking;
  }
  return act;
}

double OverlapRatio(const std::vector<std::vector<uint8_t>>& act) {
  size_t speech = 0, overlap = 0;
  for (size_t t = 0; t < act[0].size(); ++t) {
    int n = 0;
    for (const auto& a : act) n += a[t];
    speech += n >= 1;
    overlap += n >= 2;
  }
  return speech ? static_cast<double>(overlap) / speech : 0.0;
}

std::vector<double> HarmonicComb(int id, size_t n, int rate) {
  double f0 = SpeakerFundamentalHz(id);
  Rng rng(DeriveSeed(0x5eedc0deULL, static_cast<uint64_t>(id)));
  std::vector<std::pair<double, double>> partials;  // (freq, phase)
  for (int h = 1; h * f0 < 0.45 * rate && h * f0 < 4000.0; ++h) {
    partials.push_back({h * f0, rng.Uniform(0, 2 * M_PI)});
  }
  std::vector<double> out(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / rate;
    double v = 0.0;
    for (size_t h = 0; h < partials.size(); ++h) {
      v += std::sin(2 * M_PI * partials[h].first * t + partials[h].second) /
           static_cast<double>(h + 1);
    }
    out[i] = v;
  }
  double rms = 0.0;
  for (double v : out) rms += v * v;
  rms = std::sqrt(rms / std::max<size_t>(n, 1));
  if (rms > 0)
    for (double& v : out) v *= 0.1 / rms;
  return out;
}

// Linear 20 ms ramps inside each active run.
std::vector<double> Envelope(const std::vector<uint8_t>& act, size_t n,
                             int rate) {
  std::vector<double> env(n, 0.0);
  double ramp = kRampS * rate;
  size_t spf = static_cast<size_t>(rate) / kFramesPerSecond;
  for (size_t t = 0; t < act.size();) {
    if (!act[t]) {
      ++t;
      continue;
    }
    size_t b = t;
    while (t < act.size() && act[t]) ++t;
    size_t sb = b * spf, se = std::min(n, t * spf);
    for (size_t i = sb; i < se; ++i) {
      double up = (static_cast<double>(i - sb) + 0.5) / ramp;
      double down = (static_cast<double>(se - i) - 0.5) / ramp;
      env[i] = std::clamp(std::min(up, down), 0.0, 1.0);
    }
  }
  return env;
}

std::string Resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

}  // namespace

void MeetingSpec::Validate() const {
  if (num_speakers < 1) throw ConfigError("num_speakers must be >= 1");
  if (!(duration_s > 0)) throw ConfigError("duration_s must be positive");
  if (overlap_ratio < 0 || overlap_ratio > 0.5) {
    throw ConfigError("overlap_ratio must be in [0, 0.5]");
  }
  if (video_fps <= 0 || kFramesPerSecond % video_fps != 0) {
    throw ConfigError("video_fps must divide the 100 fps frame rate");
  }
  if (lip_dim < 1) throw ConfigError("lip_dim must be >= 1");
  if (sample_rate_hz != 8000 && sample_rate_hz != 16000) {
    throw ConfigError("sample_rate_hz must be 8000 or 16000");
  }
  if (mean_turn_s <= kMinTalkS) throw ConfigError("mean_turn_s must be > 0.3");
  if (!speaker_ids.empty() &&
      speaker_ids.size() != static_cast<size_t>(num_speakers)) {
    throw ConfigError("speaker_ids must list num_speakers identities");
  }
}

std::string SpeakerName(int id) { return "spk" + std::to_string(id); }

double SpeakerFundamentalHz(int id) { return 120.0 + 40.0 * id; }

std::vector<double> LipDirection(int id, int dim) {
  Rng rng(DeriveSeed(0x11b5ULL, static_cast<uint64_t>(id)));
  std::vector<double> u(static_cast<size_t>(dim));
  double norm = 0.0;
  for (double& v : u) {
    v = rng.Normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : u) v /= norm;
  return u;
}

double MeasureOverlapRatio(const DiarizationAnnotation& ann) {
  std::vector<std::pair<double, int>> events;
  for (const auto& e : ann.entries) {
    events.push_back({e.onset_s, +1});
    events.push_back({e.end_s(), -1});
  }
  std::sort(events.begin(), events.end());
  double speech = 0, overlap = 0, prev = 0;
  int active = 0;
  for (const auto& [t, d] : events) {
    if (active >= 1) speech += t - prev;
    if (active >= 2) overlap += t - prev;
    active += d;
    prev = t;
  }
  return speech > 0 ? overlap / speech : 0.0;
}

Meeting GenerateMeeting(const MeetingSpec& spec, const std::string& session_id) {
  spec.Validate();
  const int S = spec.num_speakers;
  const size_t frames =
      static_cast<size_t>(std::lround(spec.duration_s * kFramesPerSecond));
  const int rate = spec.sample_rate_hz;
  const size_t n = static_cast<size_t>(std::lround(spec.duration_s * rate));
  Rng root(spec.seed);

  Meeting m;
  m.session_id = session_id;
  m.speaker_ids = spec.speaker_ids;
  if (m.speaker_ids.empty()) {
    m.speaker_ids.resize(static_cast<size_t>(S));
    std::iota(m.speaker_ids.begin(), m.speaker_ids.end(), 0);
  }
  for (int id : m.speaker_ids) m.speakers.push_back(SpeakerName(id));

  // Activity: resample the renewal processes until the measured overlap is
  // close to the target and every speaker talks.
  double p = SpeakingProbability(S, spec.overlap_ratio);
  std::vector<std::vector<uint8_t>> best;
  double best_err = 1e9;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = root.Fork(1000 + static_cast<uint64_t>(attempt));
    std::vector<std::vector<uint8_t>> act;
    bool everyone = true;
    for (int s = 0; s < S; ++s) {
      act.push_back(SpeakerActivity(rng, frames, p, spec.mean_turn_s));
      everyone = everyone &&
                 std::find(act.back().begin(), act.back().end(), 1) !=
                     act.back().end();
    }
    double err = S >= 2 ? std::abs(OverlapRatio(act) - spec.overlap_ratio) : 0;
    if (!everyone) err += 1.0;
    if (err < best_err) {
      best_err = err;
      best = std::move(act);
    }
    if (best_err <= kOverlapTolerance) break;
  }

  m.activity = Tensor::Matrix(static_cast<size_t>(S), frames);
  LabelMatrix labels;
  labels.frame_hop_s = kFrameHopS;
  labels.speakers = m.speakers;
  labels.labels = Tensor::Matrix(static_cast<size_t>(S), frames);
  for (size_t s = 0; s < best.size(); ++s)
    for (size_t t = 0; t < frames; ++t) {
      m.activity.at(s, t) = best[s][t];
      labels.labels.at(s, t) = best[s][t];
    }
  m.annotation = LabelsToAnnotation(labels, session_id);

  // Audio: activity-gated harmonic combs plus white noise at the target SNR
  // measured over speech.
  std::vector<double> mix(n, 0.0);
  for (size_t s = 0; s < best.size(); ++s) {
    auto comb = HarmonicComb(m.speaker_ids[s], n, rate);
    auto env = Envelope(best[s], n, rate);
    for (size_t i = 0; i < n; ++i) mix[i] += comb[i] * env[i];
  }
  double power = 0.0;
  size_t speech_samples = 0;
  size_t spf = static_cast<size_t>(rate) / kFramesPerSecond;
  for (size_t i = 0; i < n; ++i) {
    size_t t = std::min(i / spf, frames - 1);
    bool any = false;
    for (const auto& a : best) any = any || a[t];
    if (any) {
      power += mix[i] * mix[i];
      ++speech_samples;
    }
  }
  power = speech_samples ? power / speech_samples : 0.01;
  double noise_std = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
  Rng noise = root.Fork(1);
  m.audio.sample_rate_hz = rate;
  m.audio.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    m.audio.samples[i] = std::clamp(mix[i] + noise_std * noise.Normal(), -1.0, 1.0);
  }

  // Lips: activity fraction over each video frame times the speaker's
  // direction, plus unit-variance noise.
  size_t per_video = static_cast<size_t>(kFramesPerSecond / spec.video_fps);
  size_t vframes = frames / per_video;
  Rng lip_noise = root.Fork(2);
  for (size_t s = 0; s < best.size(); ++s) {
    auto dir = LipDirection(m.speaker_ids[s], spec.lip_dim);
    Tensor lip = Tensor::Matrix(vframes, static_cast<size_t>(spec.lip_dim));
    for (size_t v = 0; v < vframes; ++v) {
      double a = 0.0;
      for (size_t k = 0; k < per_video; ++k) a += best[s][v * per_video + k];
      a /= static_cast<double>(per_video);
      for (size_t d = 0; d < dir.size(); ++d) {
        lip.at(v, d) = a * spec.lip_gain * dir[d] + lip_noise.Normal();
      }
    }
    m.lips.push_back(std::move(lip));
  }
  return m;
}

void WriteManifest(const std::string& path,
                   const std::vector<ManifestRecord>& records) {
  fs::path base = fs::absolute(path).parent_path();
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  auto rel = [&](const std::string& p) {
    return fs::path(p).lexically_relative(base).string();
  };
  for (const auto& r : records) {
    nlohmann::json j;
    j["session"] = r.session;
    j["split"] = r.split;
    j["wav"] = rel(r.wav);
    j["features"] = rel(r.features);
    std::vector<std::string> lips;
    for (const auto& l : r.lips) lips.push_back(rel(l));
    j["lips"] = lips;
    j["rttm"] = rel(r.rttm);
    j["speakers"] = r.speakers;
    j["speaker_ids"] = r.speaker_ids;
    j["num_frames"] = r.num_frames;
    os << j.dump() << '\n';
  }
  if (!os) throw Error("write failed: " + path);
}

std::vector<ManifestRecord> ReadManifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingDataError("cannot open manifest: " + path);
  fs::path base = fs::absolute(path).parent_path();
  std::vector<ManifestRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.session = j.at("session").get<std::string>();
      r.split = j.value("split", "train");
      r.wav = Resolve(base, j.at("wav").get<std::string>());
      r.features = Resolve(base, j.at("features").get<std::string>());
      for (const auto& l : j.at("lips")) {
        r.lips.push_back(Resolve(base, l.get<std::string>()));
      }
      r.rttm = Resolve(base, j.at("rttm").get<std::string>());
      r.speakers = j.at("speakers").get<std::vector<std::string>>();
      r.speaker_ids = j.value("speaker_ids", std::vector<int>{});
      r.num_frames = j.value("num_frames", size_t{0});
      if (r.lips.size() != r.speakers.size()) {
        throw Error("lips and speakers differ in length");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path + ": " + e.what(), lineno);
    }
  }
  return out;
}

std::vector<ManifestRecord> GenerateCorpus(const CorpusOptions& options) {
  if (options.num_meetings < 1) throw ConfigError("need at least one meeting");
  if (options.speaker_pool < options.meeting.num_speakers) {
    throw ConfigError("speaker pool smaller than speakers per meeting");
  }
  if (options.train_fraction < 0 || options.train_fraction > 1) {
    throw ConfigError("train_fraction must be in [0, 1]");
  }
  fs::path root(options.out_dir);
  for (const char* sub : {"wav", "feats", "lips", "rttm"}) {
    std::error_code ec;
    fs::create_directories(root / sub, ec);
    if (ec) throw Error("cannot create " + (root / sub).string() + ": " + ec.message());
  }
  int n_train = static_cast<int>(std::lround(options.num_meetings *
                                              options.train_fraction));
  std::vector<ManifestRecord> records;
  for (int i = 0; i < options.num_meetings; ++i) {
    MeetingSpec spec = options.meeting;
    spec.seed = DeriveSeed(options.seed, static_cast<uint64_t>(i));
    Rng pick(DeriveSeed(spec.seed, 77));
    std::vector<int> pool(static_cast<size_t>(options.speaker_pool));
    std::iota(pool.begin(), pool.end(), 0);
    for (size_t k = pool.size(); k > 1; --k) {
      std::swap(pool[k - 1], pool[pick.Below(k)]);
    }
    spec.speaker_ids.assign(pool.begin(), pool.begin() + spec.num_speakers);
    std::sort(spec.speaker_ids.begin(), spec.speaker_ids.end());

    char name[32];
    std::snprintf(name, sizeof(name), "meet%03d", i);
    Meeting m = GenerateMeeting(spec, name);

    ManifestRecord r;
    r.session = name;
    r.split = i < n_train ? "train" : "dev";
    r.wav = (fs::absolute(root) / "wav" / (r.session + ".wav")).string();
    r.features = (fs::absolute(root) / "feats" / (r.session + ".lmel")).string();
    r.rttm = (fs::absolute(root) / "rttm" / (r.session + ".rttm")).string();
    r.speakers = m.speakers;
    r.speaker_ids = m.speaker_ids;
    WriteWav(r.wav, m.audio);
    // Features come from the quantized file so that every later stage sees
    // the same input.
    LogMelFeatures feats = LogMel(ReadWav(r.wav));
    r.num_frames = feats.num_frames();
    WriteFeatures(r.features, feats);
    for (size_t s = 0; s < m.speakers.size(); ++s) {
      std::string lp = (fs::absolute(root) / "lips" /
                        (r.session + "_" + m.speakers[s] + ".lipf"))
                           .string();
      WriteLipFeatures(lp, m.lips[s]);
      r.lips.push_back(lp);
    }
    WriteRttmFile(r.rttm, {{r.session, m.annotation}});
    records.push_back(std::move(r));
  }
  WriteManifest((root / "manifest.jsonl").string(), records);
  return records;
}

}  // namespace avsd
