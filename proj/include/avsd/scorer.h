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

#ifndef AVSD_SCORER_H_
#define AVSD_SCORER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "avsd/rttm.h"

namespace avsd {

enum class SpeakerMapping { kIdentity, kOptimal };

SpeakerMapping ParseSpeakerMapping(const std::string& name);
std::string ToString(SpeakerMapping mapping);

struct DerOptions {
  double collar_s = 0.0;
  SpeakerMapping mapping = SpeakerMapping::kIdentity;
  double resolution_s = 0.001;
};

struct DerReport {
  double fa_pct = 0.0;
  double miss_pct = 0.0;
  double spkerr_pct = 0.0;
  double der_pct = 0.0;
  // Reference speech time (speaker-weighted) inside the scored region.
  double scored_speech_s = 0.0;
  // Wall-clock time inside the scored region.
  double scored_time_s = 0.0;
  double fa_s = 0.0;
  double miss_s = 0.0;
  double spkerr_s = 0.0;
  // Hypothesis speaker -> reference speaker.
  std::map<std::string, std::string> mapping;

  // Integer tick totals the percentages were computed from.
  int64_t fa_ticks = 0, miss_ticks = 0, spkerr_ticks = 0, speech_ticks = 0;
  int64_t scored_ticks = 0;
  double resolution_s = 0.001;
};

// Diarization error rate between two annotations of the same session.
// Times are snapped to the resolution grid; with a collar, +-collar_s
// around every reference boundary is excluded from scoring.
DerReport ScoreDer(const DiarizationAnnotation& ref,
                   const DiarizationAnnotation& hyp,
                   const DerOptions& options = {});

// Time-weighted pooling of per-session reports.
DerReport AggregateReports(const std::vector<DerReport>& reports);

// FA + MISS + SPKERR; throws on negative components.
double DerFromComponents(double fa, double miss, double spkerr);

// Maximum-weight one-to-one assignment between rows and columns of
// `weights` (rows x cols). Returns, for each row, the matched column or -1.
// Exact for up to 16 entries on the smaller side.
std::vector<int> MaxWeightAssignment(
    const std::vector<std::vector<int64_t>>& weights);

}  // namespace avsd

#endif  // AVSD_SCORER_H_
