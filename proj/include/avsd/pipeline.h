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

#ifndef AVSD_PIPELINE_H_
#define AVSD_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "avsd/config.h"
#include "avsd/decodepipe.h"
#include "avsd/scorer.h"
#include "avsd/secondsv.h"
#include "avsd/session.h"
#include "avsd/synthgen.h"
#include "avsd/trainer.h"

namespace avsd {

// Reads features and lip streams of a manifest record. Missing files raise
// MissingDataError naming the path.
RawSession LoadRawSession(const ManifestRecord& record);
DiarizationAnnotation LoadReference(const ManifestRecord& record);
AudioSignal LoadAudio(const ManifestRecord& record);
std::vector<ManifestRecord> SelectSplit(const std::vector<ManifestRecord>& all,
                                        const std::string& split);
// Fails fast if any file referenced by the records is absent.
void CheckRecordFiles(const std::vector<ManifestRecord>& records);

// Pretrains the lip encoder and the utterance extractor on the training
// records; the result holds lip_encoder/* and speaker_extractor/*.
ParameterStore RunPretraining(const PipelineConfig& cfg,
                              const std::vector<ManifestRecord>& train,
                              std::ostream* log = nullptr);

// Fresh bundle with the pretrained modules installed and the speaker
// encoder initialized from the extractor.
TrainingState InitJointState(const PipelineConfig& cfg,
                             const ParameterStore& pretrained);

std::vector<TrainingSession> LoadTrainingSessions(
    const PipelineConfig& cfg, const ParameterStore& params,
    const std::vector<ManifestRecord>& records);

// Sliding-window probabilities for one prepared session.
ActivityProbabilityMatrix DecodeProbabilities(const ModelConfig& model,
                                              const ParameterStore& params,
                                              const SessionInputs& in,
                                              const DecodeConfig& cfg,
                                              size_t jobs = 1);

// Median filter (kernel 1 = off), threshold and segment assembly.
DiarizationAnnotation ProbabilitiesToAnnotation(
    const ActivityProbabilityMatrix& probs,
    const std::vector<std::string>& speakers, const std::string& session_id,
    const DecodeConfig& cfg);

// Embedding of a cropped piece of audio with the utterance extractor.
EmbeddingFn MakeExtractorEmbedding(const ModelConfig& model,
                                   const ParameterStore& params);

struct AblationRow {
  std::string name;
  DerReport report;
};

struct DemoReport {
  uint64_t seed = 0;
  std::vector<AblationRow> rows;  // base, +shift, +median, +SV
  DerReport untrained;
  // Secondary SV on hypotheses with corrupted single-speaker labels.
  DerReport corrupted;
  DerReport corrupted_corrected;
  // Secondary SV on corrupted reference labels.
  RestorationStats restoration;
  double final_train_loss = 0.0;
  double seconds = 0.0;

  std::string ToTable() const;
  std::string ToJson() const;
};

// Generates a corpus under work_dir, pretrains, trains, decodes the dev
// split with each post-processing step and scores every variant.
DemoReport RunDemo(const PipelineConfig& cfg, const std::string& work_dir,
                   std::ostream* log = nullptr);

// Seed conventions shared by the demo and the CLI.
PipelineConfig WithSeed(PipelineConfig cfg, uint64_t seed);

}  // namespace avsd

#endif  // AVSD_PIPELINE_H_
