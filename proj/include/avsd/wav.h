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

#ifndef AVSD_WAV_H_
#define AVSD_WAV_H_

#include <string>

#include "avsd/dsp.h"

namespace avsd {

// PCM 16-bit mono little-endian RIFF/WAVE at 8 or 16 kHz.
AudioSignal ReadWav(const std::string& path);
// Samples are clipped to [-1, 1] and quantized to 16 bits.
void WriteWav(const std::string& path, const AudioSignal& signal);

}  // namespace avsd

#endif  // AVSD_WAV_H_
