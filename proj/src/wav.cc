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

#include "avsd/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "avsd/binary_io.h"

namespace avsd {

AudioSignal ReadWav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingDataError("cannot open wav: " + path);
  ExpectMagic(is, "RIFF", path);
  ReadPod<uint32_t>(is, path);
  ExpectMagic(is, "WAVE", path);

  bool have_fmt = false;
  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  while (true) {
    char id[4];
    is.read(id, 4);
    if (!is) throw Error(path + ": no data chunk");
    auto size = ReadPod<uint32_t>(is, path);
    std::string chunk(id, 4);
    if (chunk == "fmt ") {
      auto format = ReadPod<uint16_t>(is, path);
      channels = ReadPod<uint16_t>(is, path);
      rate = ReadPod<uint32_t>(is, path);
      ReadPod<uint32_t>(is, path);  // byte rate
      ReadPod<uint16_t>(is, path);  // block align
      bits = ReadPod<uint16_t>(is, path);
      if (size > 16) is.ignore(size - 16 + (size & 1));
      if (format != 1) throw Error(path + ": only PCM wav is supported");
      have_fmt = true;
    } else if (chunk == "data") {
      if (!have_fmt) throw Error(path + ": data chunk before fmt chunk");
      if (channels != 1 || bits != 16) {
        throw Error(path + ": expected 16-bit mono, got " +
                    std::to_string(channels) + " channels / " +
                    std::to_string(bits) + " bits");
      }
      if (rate != 8000 && rate != 16000) {
        throw Error(path + ": unsupported sample rate " + std::to_string(rate));
      }
      std::vector<int16_t> pcm(size / 2);
      is.read(reinterpret_cast<char*>(pcm.data()),
              static_cast<std::streamsize>(pcm.size() * 2));
      if (!is) throw Error(path + ": truncated data chunk");
      AudioSignal sig;
      sig.sample_rate_hz = static_cast<int>(rate);
      sig.samples.resize(pcm.size());
      std::transform(pcm.begin(), pcm.end(), sig.samples.begin(),
                     [](int16_t v) { return v / 32768.0; });
      return sig;
    } else {
      is.ignore(size + (size & 1));
    }
  }
}

void WriteWav(const std::string& path, const AudioSignal& signal) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  uint32_t data_bytes = static_cast<uint32_t>(signal.samples.size() * 2);
  WriteMagic(os, "RIFF");
  WritePod<uint32_t>(os, 36 + data_bytes);
  WriteMagic(os, "WAVE");
  WriteMagic(os, "fmt ");
  WritePod<uint32_t>(os, 16);
  WritePod<uint16_t>(os, 1);
  WritePod<uint16_t>(os, 1);
  WritePod<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate_hz));
  WritePod<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate_hz) * 2);
  WritePod<uint16_t>(os, 2);
  WritePod<uint16_t>(os, 16);
  WriteMagic(os, "data");
  WritePod<uint32_t>(os, data_bytes);
  std::vector<int16_t> pcm(signal.samples.size());
  std::transform(signal.samples.begin(), signal.samples.end(), pcm.begin(),
                 [](double v) {
                   double c = std::clamp(v, -1.0, 1.0) * 32767.0;
                   return static_cast<int16_t>(std::lround(c));
                 });
  os.write(reinterpret_cast<const char*>(pcm.data()),
           static_cast<std::streamsize>(pcm.size() * 2));
  if (!os) throw Error("write failed: " + path);
}

}  // namespace avsd
