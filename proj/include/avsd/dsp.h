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

#ifndef AVSD_DSP_H_
#define AVSD_DSP_H_

#include <string>
#include <vector>

#include "avsd/common.h"
#include "avsd/tensor.h"

namespace avsd {

struct AudioSignal {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate_hz = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  // Throws on a non-positive rate or non-finite samples.
  void Validate() const;
  AudioSignal Crop(double begin_s, double end_s) const;
};

// T x M log-Mel energies.
struct LogMelFeatures {
  Tensor values;
  double frame_hop_s = kFrameHopS;
  double frame_len_s = kFrameLenS;
  int sample_rate_hz = 16000;

  size_t num_frames() const { return values.empty() ? 0 : values.rows(); }
  size_t num_mels() const { return values.empty() ? 0 : values.cols(); }
};

inline constexpr double kEnergyFloor = 1e-10;

// 1 + floor((num_samples - frame_len) / hop), or 0 when the signal is
// shorter than one frame.
size_t NumFrames(size_t num_samples, size_t frame_len, size_t hop);

// Splits the signal into overlapping frames starting at i * hop. Frames
// that would run past the end are dropped.
std::vector<std::vector<double>> FrameSignal(const AudioSignal& signal,
                                             double frame_len_s = kFrameLenS,
                                             double frame_hop_s = kFrameHopS);

double HzToMel(double hz);   // 2595 log10(1 + hz / 700)
double MelToHz(double mel);

// Centre frequencies (Hz) of `n_mels` triangles equally spaced on the Mel
// scale between 0 Hz and Nyquist.
std::vector<double> MelCenterFrequencies(int n_mels, int sample_rate_hz);

// n_mels x (fft_size/2 + 1) matrix of unnormalised triangular filters.
// Throws ConfigError if any filter covers no FFT bin.
Tensor MelFilterbankMatrix(int n_mels, int fft_size, int sample_rate_hz);

size_t NextPowerOfTwo(size_t n);

// Hann window -> |DFT|^2 -> Mel filterbank -> ln(max(e, kEnergyFloor)).
LogMelFeatures LogMel(const AudioSignal& signal, int n_mels = 80,
                      double frame_len_s = kFrameLenS,
                      double frame_hop_s = kFrameHopS);

void WriteFeatures(const std::string& path, const LogMelFeatures& feats);
LogMelFeatures ReadFeatures(const std::string& path);

}  // namespace avsd

#endif  // AVSD_DSP_H_
