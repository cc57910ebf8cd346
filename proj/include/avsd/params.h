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

#ifndef AVSD_PARAMS_H_
#define AVSD_PARAMS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "avsd/tensor.h"

namespace avsd {

enum class InitKind {
  kXavier,  // uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
  kZero,
  kOne,
};

// Named parameter tensors. Layers request parameters through
// GetOrCreate(); when creation is enabled a missing entry is initialized
// from (seed, name) alone, so the result does not depend on request order.
class ParameterStore {
 public:
  explicit ParameterStore(uint64_t seed = 0) : seed_(seed) {}

  uint64_t seed() const { return seed_; }
  bool allow_create() const { return allow_create_; }
  void set_allow_create(bool v) { allow_create_ = v; }

  bool Contains(const std::string& name) const {
    return params_.count(name) != 0;
  }
  const Tensor& Get(const std::string& name) const;
  Tensor& GetMutable(const std::string& name);
  void Set(const std::string& name, Tensor value);
  const Tensor& GetOrCreate(const std::string& name, const Shape& shape,
                            InitKind kind);

  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::vector<std::string> NamesWithPrefix(const std::string& prefix) const;
  size_t NumScalars() const;

  // Copies every entry of `other` whose name starts with `prefix`.
  void Merge(const ParameterStore& other, const std::string& prefix = "");

  void Write(std::ostream& os) const;
  static ParameterStore Read(std::istream& is, const std::string& origin);
  void Save(const std::string& path) const;
  static ParameterStore Load(const std::string& path);

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    return a.params_ == b.params_;
  }

 private:
  uint64_t seed_;
  bool allow_create_ = false;
  std::map<std::string, Tensor> params_;
};

Tensor InitTensor(const Shape& shape, InitKind kind, uint64_t seed,
                  const std::string& name);

using Gradients = std::map<std::string, Tensor>;

inline constexpr uint32_t kCheckpointVersion = 1;

}  // namespace avsd

#endif  // AVSD_PARAMS_H_
