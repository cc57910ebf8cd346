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

#ifndef AVSD_BINARY_IO_H_
#define AVSD_BINARY_IO_H_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "avsd/common.h"
#include "avsd/tensor.h"

namespace avsd {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts unsupported");

template <typename T>
void WritePod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("truncated " + what);
  return v;
}

void WriteMagic(std::ostream& os, const char (&magic)[5]);
// Throws if the next four bytes are not `magic`.
void ExpectMagic(std::istream& is, const char (&magic)[5],
                 const std::string& path);

// Frame-matrix dump shared by log-Mel features ("LMEL") and activity
// probabilities ("PROB"): magic, u32 rows, u32 cols, f64 hop, f64 win,
// then rows*cols f32 values in row-major order.
struct FrameMatrixFile {
  Tensor values;
  double hop_s = 0.0;
  double win_s = 0.0;
};

void WriteFrameMatrix(const std::string& path, const char (&magic)[5],
                      const FrameMatrixFile& m);
FrameMatrixFile ReadFrameMatrix(const std::string& path,
                                const char (&magic)[5]);

// Lip-feature dump: "LIPF", u32 frames, u32 dim, f32 data.
void WriteLipFeatures(const std::string& path, const Tensor& frames);
Tensor ReadLipFeatures(const std::string& path);

}  // namespace avsd

#endif  // AVSD_BINARY_IO_H_
