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

#ifndef AVSD_LAYERS_H_
#define AVSD_LAYERS_H_

#include <string>
#include <vector>

#include "avsd/autograd.h"
#include "avsd/ops.h"
#include "avsd/params.h"

namespace avsd::nn {

// Binds a tape to a parameter store under a hierarchical name prefix
// ("decoder/block0/attn/wq").
class Scope {
 public:
  Scope(Tape& tape, ParameterStore& store, std::string prefix = "")
      : tape_(&tape), store_(&store), prefix_(std::move(prefix)) {}

  Scope Sub(const std::string& name) const {
    return Scope(*tape_, *store_, prefix_.empty() ? name : prefix_ + "/" + name);
  }

  Var Param(const std::string& name, const Shape& shape, InitKind kind) const {
    return tape_->Param(*store_, Name(name), shape, kind);
  }
  Var Weight(const std::string& name, size_t rows, size_t cols) const {
    return Param(name, {rows, cols}, InitKind::kXavier);
  }
  Var Bias(const std::string& name, size_t cols) const {
    return Param(name, {1, cols}, InitKind::kZero);
  }
  Var Constant(Tensor t) const { return tape_->Constant(std::move(t)); }

  std::string Name(const std::string& leaf) const {
    return prefix_.empty() ? leaf : prefix_ + "/" + leaf;
  }
  Tape& tape() const { return *tape_; }
  ParameterStore& store() const { return *store_; }
  const std::string& prefix() const { return prefix_; }

 private:
  Tape* tape_;
  ParameterStore* store_;
  std::string prefix_;
};

// Parameters: w [in, out], b [1, out].
Var LinearLayer(const Scope& s, const Var& x, size_t out_dim);
// Parameters: gamma [1, D] (ones), beta [1, D] (zeros).
Var LayerNormLayer(const Scope& s, const Var& x);

// Scaled dot-product attention with `heads` heads over the column blocks of
// the projected inputs, followed by an output projection. If `weights` is
// non-null it receives one [T_q, T_k] matrix per head.
Var MultiHeadAttention(const Scope& s, const Var& q, const Var& k,
                       const Var& v, size_t heads,
                       std::vector<Tensor>* weights = nullptr);

// Linear -> swish -> linear.
Var FeedForward(const Scope& s, const Var& x, size_t hidden);

// Pre-norm transformer encoder block.
Var TransformerBlock(const Scope& s, const Var& x, size_t heads, size_t ffn);

// Conformer block: half-step FFN, self-attention, convolution module
// (pointwise + GLU, depthwise conv, layer norm, swish, pointwise), half-step
// FFN and a final layer norm. Layer norm stands in for batch norm.
Var ConformerBlock(const Scope& s, const Var& x, size_t heads, size_t ffn,
                   size_t conv_kernel);

// Squeeze-and-excitation over channels: time-average, bottleneck MLP,
// sigmoid gates applied per channel.
Var SqueezeExcite(const Scope& s, const Var& x, size_t bottleneck);

}  // namespace avsd::nn

#endif  // AVSD_LAYERS_H_
