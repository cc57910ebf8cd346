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

#ifndef AVSD_OPS_H_
#define AVSD_OPS_H_

#include <vector>

#include "avsd/autograd.h"
#include "avsd/tensor.h"

// Differentiable ops on rank-2 Vars. Vectors are 1 x D row matrices; no
// broadcasting happens beyond the explicit *Row / *Col / Broadcast ops.
namespace avsd::nn {

Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
Var AddScalar(const Var& a, double s);

Var MatMul(const Var& a, const Var& b);       // [M,K] x [K,N]
Var MatMulTransB(const Var& a, const Var& b);  // [M,K] x [N,K]^T
Var Transpose(const Var& a);
Var Reshape(const Var& a, size_t rows, size_t cols);

// x[T,Din] W[Din,Dout] + b[1,Dout].
Var Linear(const Var& x, const Var& w, const Var& b);
Var AddRow(const Var& x, const Var& row);   // x[T,D] + row[1,D]
Var MulRow(const Var& x, const Var& row);   // x[T,D] * row[1,D]
Var MulCol(const Var& x, const Var& col);   // x[T,D] * col[T,1]

Var Relu(const Var& x);
Var Sigmoid(const Var& x);
Var Swish(const Var& x);
Var Tanh(const Var& x);
// Gated linear unit over the column halves: x[:, :C] * sigmoid(x[:, C:]).
Var Glu(const Var& x);

// axis 1 normalizes each row, axis 0 each column.
Var Softmax(const Var& x, int axis = 1);
Var LayerNorm(const Var& x, const Var& gamma, const Var& beta,
              double eps = 1e-5);

// Per-channel temporal convolution, zero "same" padding of (k-1)/2 frames
// on each side. kernel is [k, C] with k odd.
Var DepthwiseConv1d(const Var& x, const Var& kernel);
// Stacks k time-shifted copies of x (offsets (j - (k-1)/2) * dilation,
// zero padded) side by side: [T, C] -> [T, k*C]. A full 1-D convolution is
// Linear(Unfold(x)).
Var Unfold(const Var& x, size_t k, size_t dilation = 1);
Var Conv1d(const Var& x, const Var& w, const Var& b, size_t k,
           size_t dilation = 1);

// [T,D] -> [1,2D]: per-column mean followed by per-column standard
// deviation, computed as sqrt(var + eps) - sqrt(eps) so that it is smooth
// everywhere and exactly zero on constant input.
Var MeanStdPool(const Var& x);
Var MeanRows(const Var& x);  // [T,D] -> [1,D]
Var SumAll(const Var& x);    // -> [1,1]
Var MeanAll(const Var& x);   // -> [1,1]

Var ConcatCols(const std::vector<Var>& parts);
Var ConcatRows(const std::vector<Var>& parts);
Var SliceCols(const Var& x, size_t begin, size_t count);
Var SliceRows(const Var& x, size_t begin, size_t count);
Var RepeatRows(const Var& x, size_t factor);  // row t -> rows t*f..t*f+f-1
Var BroadcastRows(const Var& row, size_t rows);
Var L2NormalizeRows(const Var& x);

// Mean binary cross-entropy with probabilities clamped to
// [kBceClamp, 1 - kBceClamp]; clamped cells pass no gradient.
inline constexpr double kBceClamp = 1e-7;
Var BceLoss(const Var& probs, const Tensor& labels);
// Mean over rows of -log softmax(logits)[target].
Var SoftmaxCrossEntropy(const Var& logits, const std::vector<int>& targets);

}  // namespace avsd::nn

#endif  // AVSD_OPS_H_
