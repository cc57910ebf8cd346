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

#ifndef AVSD_SYNTHGEN_H_
#define AVSD_SYNTHGEN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "avsd/dsp.h"
#include "avsd/rttm.h"
#include "avsd/tensor.h"

namespace avsd {

struct MeetingSpec {
  int num_speakers = 2;
  double duration_s = 60.0;
  // Target share of speech time (union over speakers) with >= 2 talkers.
  double overlap_ratio = 0.2;
  double snr_db = 10.0;
  uint64_t seed = 0;
  int video_fps = 25;
  int lip_dim = 16;
  int sample_rate_hz = 16000;
  double mean_turn_s = 1.5;
  // Norm of the per-speaker lip direction vector at full activity.
  double lip_gain = 3.0;
  // Global speaker identities; defaults to 0..num_speakers-1.
  std::vector<int> speaker_ids;

  void Validate() const;
};

struct Meeting {
  std::string session_id;
  AudioSignal audio;
  std::vector<int> speaker_ids;
  std::vector<std::string> speakers;  // "spk<id>"
  std::vector<Tensor> lips;           // per speaker, [video frames, lip_dim]
  Tensor activity;                    // S x (duration * 100), binary
  DiarizationAnnotation annotation;
};

std::string SpeakerName(int id);
double SpeakerFundamentalHz(int id);  // 120 + 40 * id
// Unit direction for an identity's lip features; fixed across meetings.
std::vector<double> LipDirection(int id, int dim);

// Overlapped speech time / speech time, on the annotation itself.
double MeasureOverlapRatio(const DiarizationAnnotation& ann);

Meeting GenerateMeeting(const MeetingSpec& spec,
                        const std::string& session_id = "meeting");

struct ManifestRecord {
  std::string session;
  std::string split;  // "train" or "dev"
  std::string wav;
  std::string features;
  std::vector<std::string> lips;
  std::string rttm;
  std::vector<std::string> speakers;
  std::vector<int> speaker_ids;
  size_t num_frames = 0;
};

// JSON lines; relative paths are stored relative to the manifest file and
// resolved to absolute paths on read.
void WriteManifest(const std::string& path,
                   const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> ReadManifest(const std::string& path);

struct CorpusOptions {
  int num_meetings = 10;
  MeetingSpec meeting;  // template; seed and speaker_ids are overridden
  uint64_t seed = 0;
  double train_fraction = 0.8;
  int speaker_pool = 4;
  std::string out_dir;
};

// Writes wav/, feats/, lips/, rttm/ and manifest.jsonl under out_dir.
std::vector<ManifestRecord> GenerateCorpus(const CorpusOptions& options);

}  // namespace avsd

#endif  // AVSD_SYNTHGEN_H_
