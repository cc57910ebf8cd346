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

#include "avsd/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "avsd/common.h"

namespace avsd {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

size_t NumElements(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (NumElements(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + ShapeToString(shape_) + " holds " +
                     std::to_string(NumElements(shape_)) +
                     " elements but got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::FromRows(const std::vector<std::vector<double>>& rows) {
  size_t r = rows.size();
  size_t c = r ? rows[0].size() : 0;
  Tensor t({r, c});
  for (size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) throw ShapeError("ragged rows in FromRows");
    std::copy(rows[i].begin(), rows[i].end(), t.data() + i * c);
  }
  return t;
}

Tensor Tensor::Reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::RowSlice(size_t begin, size_t count) const {
  if (begin + count > rows()) {
    throw ShapeError("row slice [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of range for " +
                     ShapeToString(shape_));
  }
  size_t c = cols();
  std::vector<double> d(data_.begin() + begin * c,
                        data_.begin() + (begin + count) * c);
  return Tensor({count, c}, std::move(d));
}

Tensor Tensor::Transposed() const {
  size_t r = rows(), c = cols();
  Tensor t({c, r});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) t.data_[j * r + i] = data_[i * c + j];
  return t;
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void CheckSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

}  // namespace avsd
