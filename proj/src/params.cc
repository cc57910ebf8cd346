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

#include "avsd/params.h"

#include <cmath>
#include <fstream>

#include "avsd/binary_io.h"
#include "avsd/common.h"
#include "avsd/rng.h"

namespace avsd {

Tensor InitTensor(const Shape& shape, InitKind kind, uint64_t seed,
                  const std::string& name) {
  switch (kind) {
    case InitKind::kZero:
      return Tensor(shape, 0.0);
    case InitKind::kOne:
      return Tensor(shape, 1.0);
    case InitKind::kXavier:
      break;
  }
  size_t fan_out = shape.empty() ? 1 : shape.back();
  size_t fan_in = NumElements(shape) / std::max<size_t>(fan_out, 1);
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(DeriveSeed(seed, HashString(name)));
  Tensor t(shape);
  for (double& v : t.values()) v = rng.Uniform(-a, a);
  return t;
}

const Tensor& ParameterStore::Get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

Tensor& ParameterStore::GetMutable(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::Set(const std::string& name, Tensor value) {
  params_[name] = std::move(value);
}

const Tensor& ParameterStore::GetOrCreate(const std::string& name,
                                          const Shape& shape, InitKind kind) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    if (it->second.shape() != shape) {
      throw ShapeError("parameter " + name + " has shape " +
                       ShapeToString(it->second.shape()) + ", layer wants " +
                       ShapeToString(shape));
    }
    return it->second;
  }
  if (!allow_create_) throw Error("missing parameter: " + name);
  return params_.emplace(name, InitTensor(shape, kind, seed_, name))
      .first->second;
}

std::vector<std::string> ParameterStore::NamesWithPrefix(
    const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = params_.lower_bound(prefix);
       it != params_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
       ++it) {
    out.push_back(it->first);
  }
  return out;
}

size_t ParameterStore::NumScalars() const {
  size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParameterStore::Merge(const ParameterStore& other,
                           const std::string& prefix) {
  for (const auto& name : other.NamesWithPrefix(prefix)) {
    params_[name] = other.Get(name);
  }
}

void ParameterStore::Write(std::ostream& os) const {
  WriteMagic(os, "AVSD");
  WritePod<uint32_t>(os, kCheckpointVersion);
  for (const auto& [name, t] : params_) {
    WritePod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    WritePod<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (size_t d : t.shape()) WritePod<uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

ParameterStore ParameterStore::Read(std::istream& is,
                                    const std::string& origin) {
  ExpectMagic(is, "AVSD", origin);
  auto version = ReadPod<uint32_t>(is, origin);
  if (version != kCheckpointVersion) {
    throw Error(origin + ": unsupported checkpoint version " +
                std::to_string(version));
  }
  ParameterStore store;
  while (is.peek() != std::char_traits<char>::eof()) {
    auto len = ReadPod<uint32_t>(is, origin);
    std::string name(len, '\0');
    is.read(name.data(), len);
    auto rank = ReadPod<uint32_t>(is, origin);
    Shape shape(rank);
    for (auto& d : shape) d = ReadPod<uint64_t>(is, origin);
    std::vector<double> data(NumElements(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw Error(origin + ": truncated record for " + name);
    store.params_.emplace(std::move(name),
                          Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

void ParameterStore::Save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  Write(os);
  if (!os) throw Error("write failed: " + path);
}

ParameterStore ParameterStore::Load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingDataError("cannot open checkpoint: " + path);
  return Read(is, path);
}

}  // namespace avsd
