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

#include "avsd/layers.h"

#include <cmath>

#include "avsd/common.h"

namespace avsd::nn {

Var LinearLayer(const Scope& s, const Var& x, size_t out_dim) {
  Var w = s.Weight("w", x.cols(), out_dim);
  Var b = s.Bias("b", out_dim);
  return Linear(x, w, b);
}

Var LayerNormLayer(const Scope& s, const Var& x) {
  size_t d = x.cols();
  Var gamma = s.Param("gamma", {1, d}, InitKind::kOne);
  Var beta = s.Param("beta", {1, d}, InitKind::kZero);
  return LayerNorm(x, gamma, beta);
}

Var MultiHeadAttention(const Scope& s, const Var& q, const Var& k,
                       const Var& v, size_t heads,
                       std::vector<Tensor>* weights) {
  size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: model dim " + std::to_string(d) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw ShapeError("attention: Q " + ShapeToString(q.value().shape()) +
                     ", K " + ShapeToString(k.value().shape()) + ", V " +
                     ShapeToString(v.value().shape()));
  }
  Var qp = LinearLayer(s.Sub("wq"), q, d);
  Var kp = LinearLayer(s.Sub("wk"), k, d);
  Var vp = LinearLayer(s.Sub("wv"), v, d);
  size_t dh = d / heads;
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (size_t h = 0; h < heads; ++h) {
    Var qh = SliceCols(qp, h * dh, dh);
    Var kh = SliceCols(kp, h * dh, dh);
    Var vh = SliceCols(vp, h * dh, dh);
    Var att = Softmax(Scale(MatMulTransB(qh, kh), scale), 1);
    if (weights) weights->push_back(att.value());
    outs.push_back(MatMul(att, vh));
  }
  Var cat = heads == 1 ? outs[0] : ConcatCols(outs);
  return LinearLayer(s.Sub("wo"), cat, d);
}

Var FeedForward(const Scope& s, const Var& x, size_t hidden) {
  Var h = Swish(LinearLayer(s.Sub("fc1"), x, hidden));
  return LinearLayer(s.Sub("fc2"), h, x.cols());
}

Var TransformerBlock(const Scope& s, const Var& x, size_t heads, size_t ffn) {
  Var n1 = LayerNormLayer(s.Sub("ln1"), x);
  Var h = Add(x, MultiHeadAttention(s.Sub("attn"), n1, n1, n1, heads));
  Var n2 = LayerNormLayer(s.Sub("ln2"), h);
  return Add(h, FeedForward(s.Sub("ffn"), n2, ffn));
}

Var ConformerBlock(const Scope& s, const Var& x, size_t heads, size_t ffn,
                   size_t conv_kernel) {
  size_t d = x.cols();
  Var h = Add(x, Scale(FeedForward(s.Sub("ffn1"),
                                   LayerNormLayer(s.Sub("ln_ffn1"), x), ffn),
                       0.5));
  Var na = LayerNormLayer(s.Sub("ln_attn"), h);
  h = Add(h, MultiHeadAttention(s.Sub("attn"), na, na, na, heads));

  Var c = LayerNormLayer(s.Sub("ln_conv"), h);
  c = Glu(LinearLayer(s.Sub("pw1"), c, 2 * d));
  c = DepthwiseConv1d(c, s.Weight("dw", conv_kernel, d));
  c = Swish(LayerNormLayer(s.Sub("ln_dw"), c));
  c = LinearLayer(s.Sub("pw2"), c, d);
  h = Add(h, c);

  h = Add(h, Scale(FeedForward(s.Sub("ffn2"),
                               LayerNormLayer(s.Sub("ln_ffn2"), h), ffn),
                   0.5));
  return LayerNormLayer(s.Sub("ln_out"), h);
}

Var SqueezeExcite(const Scope& s, const Var& x, size_t bottleneck) {
  Var pooled = MeanRows(x);
  Var z = Swish(LinearLayer(s.Sub("fc1"), pooled, bottleneck));
  Var gate = Sigmoid(LinearLayer(s.Sub("fc2"), z, x.cols()));
  return MulRow(x, gate);
}

}  // namespace avsd::nn
