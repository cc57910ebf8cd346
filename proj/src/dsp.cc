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

#include "avsd/dsp.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "avsd/binary_io.h"

namespace avsd {

namespace {

// The FFTW planner is not thread-safe; execution on a finished plan is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(PlannerMutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void PowerSpectrum(std::vector<double>* power) {
    fftw_execute(plan_);
    power->resize(n_ / 2 + 1);
    for (size_t k = 0; k <= n_ / 2; ++k) {
      (*power)[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

size_t ToSamples(double seconds, int rate) {
  return static_cast<size_t>(std::lround(seconds * rate));
}

}  // namespace

void AudioSignal::Validate() const {
  if (sample_rate_hz <= 0) {
    throw Error("audio: sample rate must be positive, got " +
                std::to_string(sample_rate_hz));
  }
  for (double s : samples) {
    if (!std::isfinite(s)) throw Error("audio: non-finite sample");
  }
}

AudioSignal AudioSignal::Crop(double begin_s, double end_s) const {
  size_t b = std::min(ToSamples(std::max(begin_s, 0.0), sample_rate_hz),
                      samples.size());
  size_t e = std::min(ToSamples(std::max(end_s, 0.0), sample_rate_hz),
                      samples.size());
  AudioSignal out;
  out.sample_rate_hz = sample_rate_hz;
  if (e > b) out.samples.assign(samples.begin() + b, samples.begin() + e);
  return out;
}

size_t NumFrames(size_t num_samples, size_t frame_len, size_t hop) {
  if (num_samples < frame_len || hop == 0) return 0;
  return 1 + (num_samples - frame_len) / hop;
}

std::vector<std::vector<double>> FrameSignal(const AudioSignal& signal,
                                             double frame_len_s,
                                             double frame_hop_s) {
  if (!(frame_hop_s > 0) || frame_len_s < frame_hop_s) {
    throw ConfigError("framing needs frame_len >= frame_hop > 0");
  }
  signal.Validate();
  size_t len = ToSamples(frame_len_s, signal.sample_rate_hz);
  size_t hop = ToSamples(frame_hop_s, signal.sample_rate_hz);
  if (hop == 0) throw ConfigError("frame hop rounds to zero samples");
  if (signal.samples.size() < len) {
    throw Error("signal too short: " + std::to_string(signal.samples.size()) +
                " samples, one frame needs " + std::to_string(len));
  }
  size_t n = NumFrames(signal.samples.size(), len, hop);
  std::vector<std::vector<double>> frames(n);
  for (size_t i = 0; i < n; ++i) {
    auto first = signal.samples.begin() + static_cast<long>(i * hop);
    frames[i].assign(first, first + static_cast<long>(len));
  }
  return frames;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

// n_mels + 2 edge frequencies: filter m spans (edge[m], edge[m+2]) and
// peaks at edge[m+1].
std::vector<double> MelEdges(int n_mels, int sample_rate_hz) {
  double top = HzToMel(sample_rate_hz / 2.0);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(top * static_cast<double>(i) / (n_mels + 1));
  }
  edges.front() = 0.0;
  edges.back() = sample_rate_hz / 2.0;
  return edges;
}

}  // namespace

std::vector<double> MelCenterFrequencies(int n_mels, int sample_rate_hz) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  auto edges = MelEdges(n_mels, sample_rate_hz);
  return {edges.begin() + 1, edges.end() - 1};
}

Tensor MelFilterbankMatrix(int n_mels, int fft_size, int sample_rate_hz) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (fft_size < 2) throw ConfigError("fft_size must be >= 2");
  auto edges = MelEdges(n_mels, sample_rate_hz);
  size_t bins = static_cast<size_t>(fft_size) / 2 + 1;
  Tensor fb = Tensor::Matrix(static_cast<size_t>(n_mels), bins);
  double bin_hz = static_cast<double>(sample_rate_hz) / fft_size;
  for (size_t m = 0; m < static_cast<size_t>(n_mels); ++m) {
    double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (size_t k = 0; k < bins; ++k) {
      double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb.at(m, k) = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw ConfigError("mel filter " + std::to_string(m) + " of " +
                        std::to_string(n_mels) + " covers no FFT bin at size " +
                        std::to_string(fft_size) + "; use fewer mels");
    }
  }
  return fb;
}

size_t NextPowerOfTwo(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

LogMelFeatures LogMel(const AudioSignal& signal, int n_mels,
                      double frame_len_s, double frame_hop_s) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  auto frames = FrameSignal(signal, frame_len_s, frame_hop_s);
  size_t len = frames.front().size();
  size_t nfft = NextPowerOfTwo(len);
  Tensor fb = MelFilterbankMatrix(n_mels, static_cast<int>(nfft),
                                  signal.sample_rate_hz);

  std::vector<double> window(len);
  for (size_t i = 0; i < len; ++i) {
    window[i] = len > 1 ? 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (len - 1))
                        : 1.0;
  }

  LogMelFeatures out;
  out.frame_hop_s = frame_hop_s;
  out.frame_len_s = frame_len_s;
  out.sample_rate_hz = signal.sample_rate_hz;
  out.values = Tensor::Matrix(frames.size(), static_cast<size_t>(n_mels));

  RealFft fft(nfft);
  std::vector<double> power;
  size_t bins = nfft / 2 + 1;
  for (size_t t = 0; t < frames.size(); ++t) {
    double* in = fft.input();
    for (size_t i = 0; i < len; ++i) in[i] = frames[t][i] * window[i];
    std::fill(in + len, in + nfft, 0.0);
    fft.PowerSpectrum(&power);
    for (size_t m = 0; m < static_cast<size_t>(n_mels); ++m) {
      const double* w = fb.data() + m * bins;
      double e = 0.0;
      for (size_t k = 0; k < bins; ++k) e += w[k] * power[k];
      out.values.at(t, m) = std::log(std::max(e, kEnergyFloor));
    }
  }
  return out;
}

void WriteFeatures(const std::string& path, const LogMelFeatures& feats) {
  WriteFrameMatrix(path, "LMEL",
                   {feats.values, feats.frame_hop_s, feats.frame_len_s});
}

LogMelFeatures ReadFeatures(const std::string& path) {
  auto m = ReadFrameMatrix(path, "LMEL");
  LogMelFeatures f;
  f.values = std::move(m.values);
  f.frame_hop_s = m.hop_s;
  f.frame_len_s = m.win_s;
  return f;
}

}  // namespace avsd
