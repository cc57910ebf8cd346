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

#ifndef AVSD_SECONDSV_H_
#define AVSD_SECONDSV_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "avsd/dsp.h"
#include "avsd/rttm.h"

namespace avsd {

struct SvConfig {
  double min_segment_s = 0.5;
  double reassign_margin = 0.1;  // cosine
  size_t enroll_longest_k = 3;
  int jobs = 1;

  void Validate() const;
};

struct SpeakerInterval {
  std::string speaker;
  double begin_s = 0.0;
  double end_s = 0.0;
  double duration() const { return end_s - begin_s; }
  friend bool operator==(const SpeakerInterval&,
                         const SpeakerInterval&) = default;
};

// Maximal intervals in which exactly one speaker is active, tagged with that
// speaker and sorted by onset. Intervals shorter than `min_segment_s` are
// dropped.
std::vector<SpeakerInterval> SingleSpeakerSegments(
    const DiarizationAnnotation& ann, double min_segment_s = 0.0);

// Maps a cropped piece of audio to a speaker embedding.
using EmbeddingFn = std::function<std::vector<double>(const AudioSignal&)>;

struct SvResult {
  DiarizationAnnotation annotation;
  size_t segments_checked = 0;
  size_t segments_relabeled = 0;
  std::vector<std::string> exempt_speakers;  // no usable centroid
};

// Nearest-centroid relabeling of single-speaker segments. Each speaker's
// centroid is the normalized mean embedding of its k longest single-speaker
// segments; a segment moves to the best other speaker when that speaker's
// cosine beats its own by more than the margin.
SvResult CorrectSpeakers(const DiarizationAnnotation& ann,
                         const AudioSignal& audio, const EmbeddingFn& embed,
                         const SvConfig& cfg);

// Moves [begin, end) from `from` to `to` and renormalizes.
DiarizationAnnotation Relabel(const DiarizationAnnotation& ann,
                              const std::string& from, const std::string& to,
                              double begin_s, double end_s);

double CosineSimilarity(const std::vector<double>& a,
                        const std::vector<double>& b);

// Seeded label corruption used to exercise the corrector.
struct CorruptedLabel {
  SpeakerInterval interval;  // original speaker
  std::string assigned;      // wrong speaker written into the annotation
};

struct Corruption {
  DiarizationAnnotation annotation;
  std::vector<CorruptedLabel> corrupted;
  std::vector<SpeakerInterval> clean;  // untouched single-speaker segments
};

// Swaps the label of `fraction` of the single-speaker segments (at least
// one when any is eligible). The replacement speaker must be silent within
// `guard_s` of the segment so that the swap cannot merge with existing
// speech; segments with no such speaker are left clean.
Corruption CorruptSingleSpeakerLabels(const DiarizationAnnotation& ann,
                                      double fraction, uint64_t seed,
                                      double min_segment_s = 0.5,
                                      double guard_s = 0.01);

struct RestorationStats {
  size_t corrupted = 0;
  size_t restored = 0;
  size_t clean = 0;
  size_t disturbed = 0;
  double restored_fraction() const {
    return corrupted ? static_cast<double>(restored) / corrupted : 1.0;
  }
  double disturbed_fraction() const {
    return clean ? static_cast<double>(disturbed) / clean : 0.0;
  }
};

// Speaker labeling the whole of [begin, end) alone in `ann`, or "" if none.
std::string SoleSpeaker(const DiarizationAnnotation& ann, double begin_s,
                        double end_s);

RestorationStats EvaluateRestoration(const Corruption& corruption,
                                     const DiarizationAnnotation& corrected);

}  // namespace avsd

#endif  // AVSD_SECONDSV_H_
