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

#ifndef AVSD_CONFIG_H_
#define AVSD_CONFIG_H_

#include <string>
#include <vector>

#include "avsd/decodepipe.h"
#include "avsd/models.h"
#include "avsd/scorer.h"
#include "avsd/secondsv.h"
#include "avsd/session.h"
#include "avsd/synthgen.h"
#include "avsd/trainer.h"

namespace avsd {

// All stage settings in one place. Backed by an INI file with one section
// per component; see docs/config.md.
struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  PretrainConfig pretrain_extractor;
  PretrainConfig pretrain_lip;
  size_t extractor_clip_frames = 100;
  EnrollmentConfig enroll;
  DecodeConfig decode;
  SvConfig sv;
  DerOptions score;
  CorpusOptions corpus;
  int jobs = 1;

  // Throws ConfigError on the first invalid setting.
  void Validate() const;
};

// Defaults tuned for the synthetic desk-scale setting.
PipelineConfig DefaultPipelineConfig();

// Applies an INI document on top of `base`. Unknown sections or keys and
// malformed values raise ConfigError.
PipelineConfig ParsePipelineConfig(const std::string& text,
                                   const PipelineConfig& base);
// Missing file -> MissingDataError.
PipelineConfig LoadPipelineConfig(const std::string& path);

// Renders every key; ParsePipelineConfig(RenderPipelineConfig(c)) == c.
std::string RenderPipelineConfig(const PipelineConfig& cfg);

// Sets one "section.key" to a textual value.
void SetConfigValue(PipelineConfig* cfg, const std::string& key,
                    const std::string& value);
std::vector<std::string> ConfigKeys();

}  // namespace avsd

#endif  // AVSD_CONFIG_H_
