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

#ifndef AVSD_DECODEPIPE_H_
#define AVSD_DECODEPIPE_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "avsd/rttm.h"
#include "avsd/tensor.h"

namespace avsd {

// S x T per-speaker activity probabilities.
struct ActivityProbabilityMatrix {
  Tensor probs;
  double frame_hop_s = 0.01;

  size_t num_speakers() const { return probs.empty() ? 0 : probs.rows(); }
  size_t num_frames() const { return probs.empty() ? 0 : probs.cols(); }
};

void WriteProbabilities(const std::string& path,
                        const ActivityProbabilityMatrix& m);
ActivityProbabilityMatrix ReadProbabilities(const std::string& path);

struct DecodeConfig {
  size_t chunk_frames = 600;
  size_t shift_frames = 100;
  size_t median_kernel = 11;  // 1 disables smoothing
  double threshold = 0.5;
  double min_segment_s = 0.2;
  double min_gap_s = 0.1;

  void Validate() const;
};

// Returns S x length probabilities for frames [start, start + length).
using WindowPredictor = std::function<Tensor(size_t start, size_t length)>;

struct Window {
  size_t start;
  size_t length;
  friend bool operator==(const Window&, const Window&) = default;
};

// Windows start at 0, shift, 2*shift, ... while they fit; if the last one
// stops short of T a final window is aligned to end at T. A session shorter
// than one chunk is a single window of length T.
std::vector<Window> PlanWindows(size_t num_frames, size_t chunk, size_t shift);

// Every frame gets the mean of all window predictions covering it. Windows
// run on up to `jobs` threads; the reduction order is fixed.
ActivityProbabilityMatrix SlidingWindowDecode(const WindowPredictor& predict,
                                              size_t num_frames,
                                              const DecodeConfig& cfg,
                                              size_t jobs = 1);

// Per-row running median with replicate padding. k must be odd.
ActivityProbabilityMatrix MedianFilter(const ActivityProbabilityMatrix& in,
                                       size_t k);

struct TimeSpan {
  double begin_s;
  double end_s;
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

// Frame t is active iff p >= threshold and covers [t*hop, (t+1)*hop).
// Runs separated by gaps shorter than min_gap_s are merged, then segments
// shorter than min_segment_s are dropped. One sorted list per row.
std::vector<std::vector<TimeSpan>> ThresholdToSegments(
    const ActivityProbabilityMatrix& probs, const DecodeConfig& cfg);

DiarizationAnnotation SegmentsToAnnotation(
    const std::vector<std::vector<TimeSpan>>& segments,
    const std::vector<std::string>& speakers, const std::string& session_id);

}  // namespace avsd

#endif  // AVSD_DECODEPIPE_H_
