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

#ifndef AVSD_COMMON_H_
#define AVSD_COMMON_H_

#include <stdexcept>
#include <string>

namespace avsd {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError -> 1,
// MissingDataError -> 2, everything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingDataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Acoustic frame rate shared by features, labels and decoder outputs.
inline constexpr double kFrameHopS = 0.010;
inline constexpr double kFrameLenS = 0.025;
inline constexpr int kFramesPerSecond = 100;

}  // namespace avsd

#endif  // AVSD_COMMON_H_
