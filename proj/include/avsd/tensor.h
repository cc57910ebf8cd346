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

#ifndef AVSD_TENSOR_H_
#define AVSD_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace avsd {

using Shape = std::vector<size_t>;

std::string ShapeToString(const Shape& shape);
size_t NumElements(const Shape& shape);

// Dense row-major array of doubles. Most of the library works with rank-2
// tensors (rows x cols); higher ranks exist only for storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Matrix(size_t rows, size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor FromRows(const std::vector<std::vector<double>>& rows);
  static Tensor Scalar(double v) { return Tensor({1, 1}, v); }

  const Shape& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors.
  size_t rows() const { return shape_.at(0); }
  size_t cols() const { return shape_.size() > 1 ? shape_[1] : 1; }
  double& at(size_t r, size_t c) { return data_[r * cols() + c]; }
  double at(size_t r, size_t c) const { return data_[r * cols() + c]; }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }
  const std::vector<double>& vec() const { return data_; }

  Tensor Reshaped(Shape shape) const;
  Tensor RowSlice(size_t begin, size_t count) const;
  Tensor Transposed() const;

  bool AllFinite() const;
  void Fill(double v);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

void CheckSameShape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace avsd

#endif  // AVSD_TENSOR_H_
