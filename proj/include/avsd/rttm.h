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

#ifndef AVSD_RTTM_H_
#define AVSD_RTTM_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "avsd/tensor.h"

namespace avsd {

struct Segment {
  std::string speaker;
  double onset_s = 0.0;
  double duration_s = 0.0;

  double end_s() const { return onset_s + duration_s; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct DiarizationAnnotation {
  std::string session_id;
  std::vector<Segment> entries;

  // Merges overlapping or touching segments of the same speaker and sorts
  // entries by (onset, speaker, duration).
  void Normalize();
  // Throws unless every duration is positive and every onset non-negative.
  void Validate() const;
  std::vector<std::string> Speakers() const;  // sorted, unique
  double TotalDuration() const;               // sum over entries

  friend bool operator==(const DiarizationAnnotation&,
                         const DiarizationAnnotation&) = default;
};

using AnnotationMap = std::map<std::string, DiarizationAnnotation>;

// Parses "SPEAKER <file> <chan> <onset> <dur> <NA> <NA> <spk> <NA> [<NA>]"
// lines. Blank lines and ";;" comments are ignored. Other record types are
// an error unless `lenient`, in which case they are skipped. Each session is
// normalized.
AnnotationMap ParseRttm(std::string_view text, bool lenient = false);
AnnotationMap ReadRttmFile(const std::string& path, bool lenient = false);

// One SPEAKER line per entry, times with two decimals (round half to even),
// sorted by session, onset and speaker; LF line endings.
std::string WriteRttm(const AnnotationMap& annotations);
std::string WriteRttm(const DiarizationAnnotation& annotation);
void WriteRttmFile(const std::string& path, const AnnotationMap& annotations);

// Two-decimal rendering used by WriteRttm.
std::string FormatCentiseconds(double seconds);

// S x T binary speaker-activity matrix on a fixed frame grid.
struct LabelMatrix {
  Tensor labels;
  double frame_hop_s = 0.01;
  std::vector<std::string> speakers;

  size_t num_speakers() const { return speakers.size(); }
  size_t num_frames() const { return labels.empty() ? 0 : labels.cols(); }
};

// Frame t of speaker s is active iff that speaker's segments overlap
// [t*hop, (t+1)*hop) by at least hop/2.
LabelMatrix AnnotationToLabels(const DiarizationAnnotation& ann,
                               const std::vector<std::string>& speakers,
                               double frame_hop_s, size_t num_frames);
// Runs of active frames become segments.
DiarizationAnnotation LabelsToAnnotation(const LabelMatrix& labels,
                                         const std::string& session_id);

}  // namespace avsd

#endif  // AVSD_RTTM_H_
