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

#include "avsd/decodepipe.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "avsd/binary_io.h"
#include "avsd/common.h"

namespace avsd {

void WriteProbabilities(const std::string& path,
                        const ActivityProbabilityMatrix& m) {
  WriteFrameMatrix(path, "PROB", {m.probs, m.frame_hop_s, m.frame_hop_s});
}

ActivityProbabilityMatrix ReadProbabilities(const std::string& path) {
  auto f = ReadFrameMatrix(path, "PROB");
  return {std::move(f.values), f.hop_s};
}

void DecodeConfig::Validate() const {
  if (chunk_frames < 1) throw ConfigError("chunk_frames must be >= 1");
  if (shift_frames < 1 || shift_frames > chunk_frames) {
    throw ConfigError("shift_frames must be in [1, chunk_frames]");
  }
  if (median_kernel < 1 || median_kernel % 2 == 0) {
    throw ConfigError("median_kernel must be odd and >= 1");
  }
  if (!(threshold > 0 && threshold < 1)) {
    throw ConfigError("threshold must be in (0, 1)");
  }
  if (min_segment_s < 0 || min_gap_s < 0) {
    throw ConfigError("min_segment_s and min_gap_s must be non-negative");
  }
}

std::vector<Window> PlanWindows(size_t num_frames, size_t chunk, size_t shift) {
  if (num_frames == 0) throw Error("cannot decode an empty session");
  if (chunk == 0 || shift == 0) throw ConfigError("chunk and shift must be > 0");
  if (num_frames <= chunk) return {{0, num_frames}};
  std::vector<Window> windows;
  size_t start = 0;
  for (; start + chunk <= num_frames; start += shift) {
    windows.push_back({start, chunk});
  }
  if (windows.back().start + chunk < num_frames) {
    windows.push_back({num_frames - chunk, chunk});
  }
  return windows;
}

ActivityProbabilityMatrix SlidingWindowDecode(const WindowPredictor& predict,
                                              size_t num_frames,
                                              const DecodeConfig& cfg,
                                              size_t jobs) {
  cfg.Validate();
  auto windows = PlanWindows(num_frames, cfg.chunk_frames, cfg.shift_frames);
  std::vector<Tensor> outputs(windows.size());
  jobs = std::max<size_t>(1, std::min(jobs, windows.size()));
  if (jobs == 1) {
    for (size_t i = 0; i < windows.size(); ++i) {
      outputs[i] = predict(windows[i].start, windows[i].length);
    }
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          for (size_t i = next++; i < windows.size(); i = next++) {
            outputs[i] = predict(windows[i].start, windows[i].length);
          }
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Running mean in window order: a frame covered by equal predictions gets
  // exactly that value back.
  size_t S = outputs.front().rows();
  Tensor mean = Tensor::Matrix(S, num_frames);
  std::vector<size_t> count(num_frames, 0);
  for (size_t i = 0; i < windows.size(); ++i) {
    const Tensor& out = outputs[i];
    if (out.rows() != S || out.cols() != windows[i].length) {
      throw ShapeError("window predictor returned " +
                       ShapeToString(out.shape()) + " for a window of " +
                       std::to_string(windows[i].length) + " frames");
    }
    for (size_t t = 0; t < windows[i].length; ++t) {
      const size_t f = windows[i].start + t;
      const double k = static_cast<double>(++count[f]);
      for (size_t s = 0; s < S; ++s)
        mean.at(s, f) += (out.at(s, t) - mean.at(s, f)) / k;
    }
  }
  return {std::move(mean), kFrameHopS};
}

ActivityProbabilityMatrix MedianFilter(const ActivityProbabilityMatrix& in,
                                       size_t k) {
  if (k == 0 || k % 2 == 0) {
    throw ConfigError("median kernel must be odd, got " + std::to_string(k));
  }
  ActivityProbabilityMatrix out = in;
  if (k == 1) return out;
  long half = static_cast<long>(k / 2);
  long T = static_cast<long>(in.num_frames());
  std::vector<double> window(k);
  for (size_t s = 0; s < in.num_speakers(); ++s) {
    for (long t = 0; t < T; ++t) {
      for (long j = -half; j <= half; ++j) {
        long idx = std::clamp(t + j, 0L, T - 1);
        window[static_cast<size_t>(j + half)] = in.probs.at(s, idx);
      }
      std::nth_element(window.begin(), window.begin() + half, window.end());
      out.probs.at(s, t) = window[static_cast<size_t>(half)];
    }
  }
  return out;
}

std::vector<std::vector<TimeSpan>> ThresholdToSegments(
    const ActivityProbabilityMatrix& probs, const DecodeConfig& cfg) {
  constexpr double kEps = 1e-9;
  double hop = probs.frame_hop_s;
  double rate = 1.0 / hop;
  bool integral = std::abs(rate - std::round(rate)) < 1e-9;
  auto seconds = [&](size_t frames) {
    return integral ? static_cast<double>(frames) / std::round(rate)
                    : static_cast<double>(frames) * hop;
  };
  std::vector<std::vector<TimeSpan>> out(probs.num_speakers());
  size_t T = probs.num_frames();
  for (size_t s = 0; s < probs.num_speakers(); ++s) {
    std::vector<std::pair<size_t, size_t>> runs;
    for (size_t t = 0; t < T;) {
      if (probs.probs.at(s, t) < cfg.threshold) {
        ++t;
        continue;
      }
      size_t b = t;
      while (t < T && probs.probs.at(s, t) >= cfg.threshold) ++t;
      if (!runs.empty() &&
          static_cast<double>(b - runs.back().second) * hop <
              cfg.min_gap_s - kEps) {
        runs.back().second = t;
      } else {
        runs.push_back({b, t});
      }
    }
    for (const auto& [b, e] : runs) {
      if (static_cast<double>(e - b) * hop < cfg.min_segment_s - kEps) continue;
      out[s].push_back({seconds(b), seconds(e)});
    }
  }
  return out;
}

DiarizationAnnotation SegmentsToAnnotation(
    const std::vector<std::vector<TimeSpan>>& segments,
    const std::vector<std::string>& speakers, const std::string& session_id) {
  if (segments.size() != speakers.size()) {
    throw Error("segments for " + std::to_string(segments.size()) +
                " speakers but " + std::to_string(speakers.size()) + " names");
  }
  DiarizationAnnotation ann;
  ann.session_id = session_id;
  for (size_t s = 0; s < segments.size(); ++s) {
    for (const auto& span : segments[s]) {
      ann.entries.push_back(
          {speakers[s], span.begin_s, span.end_s - span.begin_s});
    }
  }
  ann.Normalize();
  return ann;
}

}  // namespace avsd
