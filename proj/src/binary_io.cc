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

#include "avsd/binary_io.h"

#include <fstream>
#include <vector>

namespace avsd {

namespace {

std::ofstream OpenOut(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  return os;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingDataError("cannot open: " + path);
  return is;
}

void WriteF32(std::ostream& os, const Tensor& t) {
  std::vector<float> buf(t.values().begin(), t.values().end());
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Tensor ReadF32(std::istream& is, size_t rows, size_t cols,
               const std::string& path) {
  std::vector<float> buf(rows * cols);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw Error("truncated payload in " + path);
  return Tensor({rows, cols}, std::vector<double>(buf.begin(), buf.end()));
}

}  // namespace

void WriteMagic(std::ostream& os, const char (&magic)[5]) {
  os.write(magic, 4);
}

void ExpectMagic(std::istream& is, const char (&magic)[5],
                 const std::string& path) {
  std::array<char, 4> got{};
  is.read(got.data(), 4);
  if (!is || std::memcmp(got.data(), magic, 4) != 0) {
    throw Error(path + ": bad magic, expected \"" + std::string(magic) + "\"");
  }
}

void WriteFrameMatrix(const std::string& path, const char (&magic)[5],
                      const FrameMatrixFile& m) {
  auto os = OpenOut(path);
  WriteMagic(os, magic);
  WritePod<uint32_t>(os, static_cast<uint32_t>(m.values.rows()));
  WritePod<uint32_t>(os, static_cast<uint32_t>(m.values.cols()));
  WritePod<double>(os, m.hop_s);
  WritePod<double>(os, m.win_s);
  WriteF32(os, m.values);
  if (!os) throw Error("write failed: " + path);
}

FrameMatrixFile ReadFrameMatrix(const std::string& path,
                                const char (&magic)[5]) {
  auto is = OpenIn(path);
  ExpectMagic(is, magic, path);
  FrameMatrixFile m;
  auto rows = ReadPod<uint32_t>(is, path);
  auto cols = ReadPod<uint32_t>(is, path);
  m.hop_s = ReadPod<double>(is, path);
  m.win_s = ReadPod<double>(is, path);
  m.values = ReadF32(is, rows, cols, path);
  return m;
}

void WriteLipFeatures(const std::string& path, const Tensor& frames) {
  auto os = OpenOut(path);
  WriteMagic(os, "LIPF");
  WritePod<uint32_t>(os, static_cast<uint32_t>(frames.rows()));
  WritePod<uint32_t>(os, static_cast<uint32_t>(frames.cols()));
  WriteF32(os, frames);
  if (!os) throw Error("write failed: " + path);
}

Tensor ReadLipFeatures(const std::string& path) {
  auto is = OpenIn(path);
  ExpectMagic(is, "LIPF", path);
  auto rows = ReadPod<uint32_t>(is, path);
  auto cols = ReadPod<uint32_t>(is, path);
  return ReadF32(is, rows, cols, path);
}

}  // namespace avsd
