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

#include "avsd/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "avsd/common.h"

namespace avsd::nn {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

MapC View(const Tensor& t) {
  return MapC(t.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}
MapM View(Tensor& t) {
  return MapM(t.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

std::string Dims(const Tensor& t) { return ShapeToString(t.shape()); }

void Require(bool ok, const std::string& op, const Tensor& a,
             const Tensor& b) {
  if (!ok) {
    throw ShapeError(op + ": incompatible shapes " + Dims(a) + " and " +
                     Dims(b));
  }
}

Tape& TapeOf(const Var& v) {
  if (!v.valid()) throw Error("op on an empty Var");
  return *v.tape();
}

template <typename F>
Var Unary(const Var& x, F f, double (*df)(double x, double y)) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  size_t xi = x.id();
  Tape& tape = TapeOf(x);
  size_t yi = tape.size();
  return tape.Record(std::move(y), {x},
                     [xi, yi, df](Tape& t, const Tensor& g) {
                       const Tensor& xv = t.value(xi);
                       const Tensor& yv = t.value(yi);
                       Tensor dx(xv.shape());
                       for (size_t i = 0; i < g.size(); ++i)
                         dx[i] = g[i] * df(xv[i], yv[i]);
                       t.AccumulateGrad(xi, dx);
                     });
}

}  // namespace

Var Add(const Var& a, const Var& b) {
  CheckSameShape(a.value(), b.value(), "Add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  size_t ai = a.id(), bi = b.id();
  return TapeOf(a).Record(std::move(y), {a, b},
                          [ai, bi](Tape& t, const Tensor& g) {
                            t.AccumulateGrad(ai, g);
                            t.AccumulateGrad(bi, g);
                          });
}

Var Sub(const Var& a, const Var& b) {
  CheckSameShape(a.value(), b.value(), "Sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  size_t ai = a.id(), bi = b.id();
  return TapeOf(a).Record(std::move(y), {a, b},
                          [ai, bi](Tape& t, const Tensor& g) {
                            t.AccumulateGrad(ai, g);
                            Tensor ng = g;
                            for (double& v : ng.values()) v = -v;
                            t.AccumulateGrad(bi, ng);
                          });
}

Var Mul(const Var& a, const Var& b) {
  CheckSameShape(a.value(), b.value(), "Mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  size_t ai = a.id(), bi = b.id();
  return TapeOf(a).Record(std::move(y), {a, b},
                          [ai, bi](Tape& t, const Tensor& g) {
                            const Tensor& av = t.value(ai);
                            const Tensor& bv = t.value(bi);
                            if (t.needs_grad(ai)) {
                              Tensor da(g.shape());
                              for (size_t i = 0; i < g.size(); ++i)
                                da[i] = g[i] * bv[i];
                              t.AccumulateGrad(ai, da);
                            }
                            if (t.needs_grad(bi)) {
                              Tensor db(g.shape());
                              for (size_t i = 0; i < g.size(); ++i)
                                db[i] = g[i] * av[i];
                              t.AccumulateGrad(bi, db);
                            }
                          });
}

Var Scale(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.values()) v *= s;
  size_t ai = a.id();
  return TapeOf(a).Record(std::move(y), {a}, [ai, s](Tape& t, const Tensor& g) {
    Tensor d = g;
    for (double& v : d.values()) v *= s;
    t.AccumulateGrad(ai, d);
  });
}

Var AddScalar(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.values()) v += s;
  size_t ai = a.id();
  return TapeOf(a).Record(std::move(y), {a}, [ai](Tape& t, const Tensor& g) {
    t.AccumulateGrad(ai, g);
  });
}

Var MatMul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Require(av.cols() == bv.rows(), "MatMul", av, bv);
  Tensor y = Tensor::Matrix(av.rows(), bv.cols());
  View(y).noalias() = View(av) * View(bv);
  size_t ai = a.id(), bi = b.id();
  return TapeOf(a).Record(std::move(y), {a, b},
                          [ai, bi](Tape& t, const Tensor& g) {
                            const Tensor& av = t.value(ai);
                            const Tensor& bv = t.value(bi);
                            if (t.needs_grad(ai)) {
                              View(t.GradBuffer(ai)).noalias() +=
                                  View(g) * View(bv).transpose();
                            }
                            if (t.needs_grad(bi)) {
                              View(t.GradBuffer(bi)).noalias() +=
                                  View(av).transpose() * View(g);
                            }
                          });
}

Var MatMulTransB(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Require(av.cols() == bv.cols(), "MatMulTransB", av, bv);
  Tensor y = Tensor::Matrix(av.rows(), bv.rows());
  View(y).noalias() = View(av) * View(bv).transpose();
  size_t ai = a.id(), bi = b.id();
  return TapeOf(a).Record(std::move(y), {a, b},
                          [ai, bi](Tape& t, const Tensor& g) {
                            const Tensor& av = t.value(ai);
                            const Tensor& bv = t.value(bi);
                            if (t.needs_grad(ai)) {
                              View(t.GradBuffer(ai)).noalias() +=
                                  View(g) * View(bv);
                            }
                            if (t.needs_grad(bi)) {
                              View(t.GradBuffer(bi)).noalias() +=
                                  View(g).transpose() * View(av);
                            }
                          });
}

Var Transpose(const Var& a) {
  size_t ai = a.id();
  return TapeOf(a).Record(a.value().Transposed(), {a},
                          [ai](Tape& t, const Tensor& g) {
                            t.AccumulateGrad(ai, g.Transposed());
                          });
}

Var Reshape(const Var& a, size_t rows, size_t cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeError("Reshape: cannot view " + Dims(a.value()) + " as [" +
                     std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  size_t ai = a.id();
  Shape orig = a.value().shape();
  return TapeOf(a).Record(a.value().Reshaped({rows, cols}), {a},
                          [ai, orig](Tape& t, const Tensor& g) {
                            t.AccumulateGrad(ai, g.Reshaped(orig));
                          });
}

Var Linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  Require(xv.cols() == wv.rows(), "Linear", xv, wv);
  Require(bv.rows() == 1 && bv.cols() == wv.cols(), "Linear(bias)", wv, bv);
  Tensor y = Tensor::Matrix(xv.rows(), wv.cols());
  View(y).noalias() = View(xv) * View(wv);
  View(y).rowwise() += View(bv).row(0);
  size_t xi = x.id(), wi = w.id(), bi = b.id();
  return TapeOf(x).Record(
      std::move(y), {x, w, b}, [xi, wi, bi](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(xi);
        const Tensor& wv = t.value(wi);
        if (t.needs_grad(xi)) {
          View(t.GradBuffer(xi)).noalias() += View(g) * View(wv).transpose();
        }
        if (t.needs_grad(wi)) {
          View(t.GradBuffer(wi)).noalias() += View(xv).transpose() * View(g);
        }
        if (t.needs_grad(bi)) {
          View(t.GradBuffer(bi)).row(0) += View(g).colwise().sum();
        }
      });
}

Var AddRow(const Var& x, const Var& row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  Require(rv.rows() == 1 && rv.cols() == xv.cols(), "AddRow", xv, rv);
  Tensor y = xv;
  View(y).rowwise() += View(rv).row(0);
  size_t xi = x.id(), ri = row.id();
  return TapeOf(x).Record(std::move(y), {x, row},
                          [xi, ri](Tape& t, const Tensor& g) {
                            t.AccumulateGrad(xi, g);
                            if (t.needs_grad(ri)) {
                              View(t.GradBuffer(ri)).row(0) +=
                                  View(g).colwise().sum();
                            }
                          });
}

Var MulRow(const Var& x, const Var& row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  Require(rv.rows() == 1 && rv.cols() == xv.cols(), "MulRow", xv, rv);
  Tensor y = xv;
  View(y).array().rowwise() *= View(rv).row(0).array();
  size_t xi = x.id(), ri = row.id();
  return TapeOf(x).Record(
      std::move(y), {x, row}, [xi, ri](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(xi);
        const Tensor& rv = t.value(ri);
        if (t.needs_grad(xi)) {
          Tensor dx = g;
          View(dx).array().rowwise() *= View(rv).row(0).array();
          t.AccumulateGrad(xi, dx);
        }
        if (t.needs_grad(ri)) {
          View(t.GradBuffer(ri)).row(0) +=
              (View(g).array() * View(xv).array()).matrix().colwise().sum();
        }
      });
}

Var MulCol(const Var& x, const Var& col) {
  const Tensor& xv = x.value();
  const Tensor& cv = col.value();
  Require(cv.cols() == 1 && cv.rows() == xv.rows(), "MulCol", xv, cv);
  Tensor y = xv;
  View(y).array().colwise() *= View(cv).col(0).array();
  size_t xi = x.id(), ci = col.id();
  return TapeOf(x).Record(
      std::move(y), {x, col}, [xi, ci](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(xi);
        const Tensor& cv = t.value(ci);
        if (t.needs_grad(xi)) {
          Tensor dx = g;
          View(dx).array().colwise() *= View(cv).col(0).array();
          t.AccumulateGrad(xi, dx);
        }
        if (t.needs_grad(ci)) {
          View(t.GradBuffer(ci)).col(0) +=
              (View(g).array() * View(xv).array()).matrix().rowwise().sum();
        }
      });
}

namespace {
double SigmoidFn(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var Relu(const Var& x) {
  return Unary(
      x, [](double v) { return v > 0 ? v : 0.0; },
      [](double xv, double) { return xv > 0 ? 1.0 : 0.0; });
}

Var Sigmoid(const Var& x) {
  return Unary(x, SigmoidFn, [](double, double y) { return y * (1.0 - y); });
}

Var Swish(const Var& x) {
  return Unary(
      x, [](double v) { return v * SigmoidFn(v); },
      [](double xv, double) {
        double s = SigmoidFn(xv);
        return s * (1.0 + xv * (1.0 - s));
      });
}

Var Tanh(const Var& x) {
  return Unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Glu(const Var& x) {
  size_t c = x.cols();
  if (c % 2 != 0) {
    throw ShapeError("Glu: column count must be even, got " + Dims(x.value()));
  }
  return Mul(SliceCols(x, 0, c / 2), Sigmoid(SliceCols(x, c / 2, c / 2)));
}

Var Softmax(const Var& x, int axis) {
  if (axis == 0) return Transpose(Softmax(Transpose(x), 1));
  if (axis != 1) throw ShapeError("Softmax: axis must be 0 or 1");
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row(r);
    auto out = y.row(r);
    double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - m);
      s += out[c];
    }
    for (double& v : out) v /= s;
  }
  size_t xi = x.id();
  Tape& tape = TapeOf(x);
  size_t yi = tape.size();
  return tape.Record(std::move(y), {x}, [xi, yi](Tape& t, const Tensor& g) {
    const Tensor& yv = t.value(yi);
    Tensor dx(g.shape());
    for (size_t r = 0; r < g.rows(); ++r) {
      auto gy = g.row(r);
      auto yy = yv.row(r);
      double dot = 0.0;
      for (size_t c = 0; c < gy.size(); ++c) dot += gy[c] * yy[c];
      auto d = dx.row(r);
      for (size_t c = 0; c < gy.size(); ++c) d[c] = yy[c] * (gy[c] - dot);
    }
    t.AccumulateGrad(xi, dx);
  });
}

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Require(gv.rows() == 1 && gv.cols() == xv.cols(), "LayerNorm(gamma)", xv,
          gv);
  Require(bv.rows() == 1 && bv.cols() == xv.cols(), "LayerNorm(beta)", xv, bv);
  if (!(eps > 0)) throw ShapeError("LayerNorm: eps must be positive");
  size_t n = xv.cols();
  Tensor xhat(xv.shape());
  Tensor inv_std = Tensor::Matrix(xv.rows(), 1);
  Tensor y(xv.shape());
  for (size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    auto xh = xhat.row(r);
    auto out = y.row(r);
    for (size_t c = 0; c < n; ++c) {
      xh[c] = (in[c] - mean) * is;
      out[c] = gv[c] * xh[c] + bv[c];
    }
  }
  size_t xi = x.id(), gi = gamma.id(), bi = beta.id();
  return TapeOf(x).Record(
      std::move(y), {x, gamma, beta},
      [xi, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gi);
        size_t n = g.cols();
        if (t.needs_grad(xi)) {
          Tensor dx(g.shape());
          for (size_t r = 0; r < g.rows(); ++r) {
            auto gr = g.row(r);
            auto xh = xhat.row(r);
            double sum_d = 0.0, sum_dx = 0.0;
            for (size_t c = 0; c < n; ++c) {
              double d = gr[c] * gv[c];
              sum_d += d;
              sum_dx += d * xh[c];
            }
            auto out = dx.row(r);
            double k = inv_std[r] / static_cast<double>(n);
            for (size_t c = 0; c < n; ++c) {
              double d = gr[c] * gv[c];
              out[c] = k * (static_cast<double>(n) * d - sum_d - xh[c] * sum_dx);
            }
          }
          t.AccumulateGrad(xi, dx);
        }
        if (t.needs_grad(gi)) {
          Tensor& dg = t.GradBuffer(gi);
          for (size_t r = 0; r < g.rows(); ++r)
            for (size_t c = 0; c < n; ++c) dg[c] += g.at(r, c) * xhat.at(r, c);
        }
        if (t.needs_grad(bi)) {
          Tensor& db = t.GradBuffer(bi);
          for (size_t r = 0; r < g.rows(); ++r)
            for (size_t c = 0; c < n; ++c) db[c] += g.at(r, c);
        }
      });
}

Var DepthwiseConv1d(const Var& x, const Var& kernel) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  Require(kv.cols() == xv.cols(), "DepthwiseConv1d", xv, kv);
  size_t k = kv.rows();
  if (k % 2 == 0) throw ShapeError("DepthwiseConv1d: kernel size must be odd");
  long pad = static_cast<long>(k - 1) / 2;
  long T = static_cast<long>(xv.rows());
  size_t C = xv.cols();
  Tensor y(xv.shape());
  for (long t = 0; t < T; ++t) {
    for (size_t j = 0; j < k; ++j) {
      long s = t + static_cast<long>(j) - pad;
      if (s < 0 || s >= T) continue;
      for (size_t c = 0; c < C; ++c) y.at(t, c) += kv.at(j, c) * xv.at(s, c);
    }
  }
  size_t xi = x.id(), ki = kernel.id();
  return TapeOf(x).Record(
      std::move(y), {x, kernel}, [xi, ki, pad](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(xi);
        const Tensor& kv = t.value(ki);
        long T = static_cast<long>(xv.rows());
        size_t C = xv.cols(), k = kv.rows();
        bool gx = t.needs_grad(xi), gk = t.needs_grad(ki);
        Tensor dx(xv.shape()), dk(kv.shape());
        for (long tt = 0; tt < T; ++tt) {
          for (size_t j = 0; j < k; ++j) {
            long s = tt + static_cast<long>(j) - pad;
            if (s < 0 || s >= T) continue;
            for (size_t c = 0; c < C; ++c) {
              if (gx) dx.at(s, c) += kv.at(j, c) * g.at(tt, c);
              if (gk) dk.at(j, c) += xv.at(s, c) * g.at(tt, c);
            }
          }
        }
        if (gx) t.AccumulateGrad(xi, dx);
        if (gk) t.AccumulateGrad(ki, dk);
      });
}

Var Unfold(const Var& x, size_t k, size_t dilation) {
  if (k % 2 == 0) throw ShapeError("Unfold: kernel size must be odd");
  const Tensor& xv = x.value();
  long T = static_cast<long>(xv.rows());
  size_t C = xv.cols();
  long half = static_cast<long>(k - 1) / 2;
  long dil = static_cast<long>(dilation);
  Tensor y = Tensor::Matrix(xv.rows(), k * C);
  for (long t = 0; t < T; ++t) {
    for (size_t j = 0; j < k; ++j) {
      long s = t + (static_cast<long>(j) - half) * dil;
      if (s < 0 || s >= T) continue;
      std::copy_n(xv.data() + s * C, C, y.data() + t * k * C + j * C);
    }
  }
  size_t xi = x.id();
  return TapeOf(x).Record(
      std::move(y), {x}, [xi, k, half, dil](Tape& t, const Tensor& g) {
        Tensor& dx = t.GradBuffer(xi);
        long T = static_cast<long>(dx.rows());
        size_t C = dx.cols();
        for (long tt = 0; tt < T; ++tt) {
          for (size_t j = 0; j < k; ++j) {
            long s = tt + (static_cast<long>(j) - half) * dil;
            if (s < 0 || s >= T) continue;
            const double* src = g.data() + tt * k * C + j * C;
            double* dst = dx.data() + s * C;
            for (size_t c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
      });
}

Var Conv1d(const Var& x, const Var& w, const Var& b, size_t k,
           size_t dilation) {
  if (k == 1) return Linear(x, w, b);
  return Linear(Unfold(x, k, dilation), w, b);
}

Var MeanStdPool(const Var& x) {
  constexpr double kEps = 1e-8;
  const Tensor& xv = x.value();
  size_t T = xv.rows(), D = xv.cols();
  if (T == 0) throw ShapeError("MeanStdPool: empty sequence");
  Tensor mean = Tensor::Matrix(1, D);
  Tensor root = Tensor::Matrix(1, D);
  for (size_t t = 0; t < T; ++t)
    for (size_t d = 0; d < D; ++d) mean[d] += xv.at(t, d);
  for (size_t d = 0; d < D; ++d) mean[d] /= static_cast<double>(T);
  Tensor y = Tensor::Matrix(1, 2 * D);
  for (size_t d = 0; d < D; ++d) {
    double var = 0.0;
    for (size_t t = 0; t < T; ++t) {
      double c = xv.at(t, d) - mean[d];
      var += c * c;
    }
    var /= static_cast<double>(T);
    root[d] = std::sqrt(var + kEps);
    y[d] = mean[d];
    y[D + d] = root[d] - std::sqrt(kEps);
  }
  size_t xi = x.id();
  return TapeOf(x).Record(
      std::move(y), {x},
      [xi, mean = std::move(mean), root = std::move(root)](Tape& t,
                                                           const Tensor& g) {
        const Tensor& xv = t.value(xi);
        size_t T = xv.rows(), D = xv.cols();
        double inv_t = 1.0 / static_cast<double>(T);
        Tensor dx(xv.shape());
        for (size_t tt = 0; tt < T; ++tt) {
          for (size_t d = 0; d < D; ++d) {
            dx.at(tt, d) = g[d] * inv_t +
                           g[D + d] * (xv.at(tt, d) - mean[d]) * inv_t / root[d];
          }
        }
        t.AccumulateGrad(xi, dx);
      });
}

Var MeanRows(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rows() == 0) throw ShapeError("MeanRows: empty input");
  Tensor y = Tensor::Matrix(1, xv.cols());
  View(y).row(0) = View(xv).colwise().mean();
  size_t xi = x.id();
  return TapeOf(x).Record(std::move(y), {x}, [xi](Tape& t, const Tensor& g) {
    Tensor& dx = t.GradBuffer(xi);
    double inv = 1.0 / static_cast<double>(dx.rows());
    View(dx).rowwise() += View(g).row(0) * inv;
  });
}

Var SumAll(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  size_t xi = x.id();
  return TapeOf(x).Record(Tensor::Scalar(s), {x},
                          [xi](Tape& t, const Tensor& g) {
                            Tensor& dx = t.GradBuffer(xi);
                            for (double& v : dx.values()) v += g[0];
                          });
}

Var MeanAll(const Var& x) {
  size_t n = x.value().size();
  if (n == 0) throw ShapeError("MeanAll: empty input");
  return Scale(SumAll(x), 1.0 / static_cast<double>(n));
}

Var ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("ConcatCols: no inputs");
  size_t rows = parts[0].rows();
  size_t total = 0;
  for (const Var& p : parts) {
    Require(p.rows() == rows, "ConcatCols", parts[0].value(), p.value());
    total += p.cols();
  }
  Tensor y = Tensor::Matrix(rows, total);
  std::vector<size_t> ids, offsets;
  size_t off = 0;
  for (const Var& p : parts) {
    View(y).middleCols(static_cast<Eigen::Index>(off),
                       static_cast<Eigen::Index>(p.cols())) = View(p.value());
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return TapeOf(parts[0]).Record(
      std::move(y), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape& t,
                                                           const Tensor& g) {
        for (size_t i = 0; i < ids.size(); ++i) {
          if (!t.needs_grad(ids[i])) continue;
          Tensor& d = t.GradBuffer(ids[i]);
          View(d) += View(g).middleCols(static_cast<Eigen::Index>(offsets[i]),
                                        static_cast<Eigen::Index>(d.cols()));
        }
      });
}

Var ConcatRows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("ConcatRows: no inputs");
  size_t cols = parts[0].cols();
  size_t total = 0;
  for (const Var& p : parts) {
    Require(p.cols() == cols, "ConcatRows", parts[0].value(), p.value());
    total += p.rows();
  }
  Tensor y = Tensor::Matrix(total, cols);
  std::vector<size_t> ids, offsets;
  size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(),
              y.data() + off * cols);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return TapeOf(parts[0]).Record(
      std::move(y), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape& t,
                                                           const Tensor& g) {
        for (size_t i = 0; i < ids.size(); ++i) {
          if (!t.needs_grad(ids[i])) continue;
          Tensor& d = t.GradBuffer(ids[i]);
          const double* src = g.data() + offsets[i] * g.cols();
          for (size_t j = 0; j < d.size(); ++j) d[j] += src[j];
        }
      });
}

Var SliceCols(const Var& x, size_t begin, size_t count) {
  const Tensor& xv = x.value();
  if (begin + count > xv.cols()) {
    throw ShapeError("SliceCols: [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of range for " +
                     Dims(xv));
  }
  Tensor y = Tensor::Matrix(xv.rows(), count);
  View(y) = View(xv).middleCols(static_cast<Eigen::Index>(begin),
                                static_cast<Eigen::Index>(count));
  size_t xi = x.id();
  return TapeOf(x).Record(std::move(y), {x},
                          [xi, begin, count](Tape& t, const Tensor& g) {
                            View(t.GradBuffer(xi))
                                .middleCols(static_cast<Eigen::Index>(begin),
                                            static_cast<Eigen::Index>(count)) +=
                                View(g);
                          });
}

Var SliceRows(const Var& x, size_t begin, size_t count) {
  Tensor y = x.value().RowSlice(begin, count);
  size_t xi = x.id();
  return TapeOf(x).Record(std::move(y), {x}, [xi, begin](Tape& t,
                                                         const Tensor& g) {
    Tensor& dx = t.GradBuffer(xi);
    double* dst = dx.data() + begin * dx.cols();
    for (size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
  });
}

Var RepeatRows(const Var& x, size_t factor) {
  const Tensor& xv = x.value();
  size_t C = xv.cols();
  Tensor y = Tensor::Matrix(xv.rows() * factor, C);
  for (size_t r = 0; r < xv.rows(); ++r)
    for (size_t f = 0; f < factor; ++f)
      std::copy_n(xv.data() + r * C, C, y.data() + (r * factor + f) * C);
  size_t xi = x.id();
  return TapeOf(x).Record(std::move(y), {x}, [xi, factor](Tape& t,
                                                          const Tensor& g) {
    Tensor& dx = t.GradBuffer(xi);
    size_t C = dx.cols();
    for (size_t r = 0; r < dx.rows(); ++r)
      for (size_t f = 0; f < factor; ++f)
        for (size_t c = 0; c < C; ++c)
          dx.at(r, c) += g.data()[(r * factor + f) * C + c];
  });
}

Var BroadcastRows(const Var& row, size_t rows) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) {
    throw ShapeError("BroadcastRows: expected a single row, got " + Dims(rv));
  }
  return RepeatRows(row, rows);
}

Var L2NormalizeRows(const Var& x) {
  const Tensor& xv = x.value();
  Tensor y = xv;
  Tensor norms = Tensor::Matrix(xv.rows(), 1);
  for (size_t r = 0; r < xv.rows(); ++r) {
    double s = 0.0;
    for (double v : xv.row(r)) s += v * v;
    double n = std::max(std::sqrt(s), 1e-12);
    norms[r] = n;
    for (double& v : y.row(r)) v /= n;
  }
  size_t xi = x.id();
  Tape& tape = TapeOf(x);
  size_t yi = tape.size();
  return tape.Record(std::move(y), {x},
                     [xi, yi, norms = std::move(norms)](Tape& t,
                                                        const Tensor& g) {
                       const Tensor& yv = t.value(yi);
                       Tensor dx(g.shape());
                       for (size_t r = 0; r < g.rows(); ++r) {
                         double dot = 0.0;
                         for (size_t c = 0; c < g.cols(); ++c)
                           dot += yv.at(r, c) * g.at(r, c);
                         for (size_t c = 0; c < g.cols(); ++c)
                           dx.at(r, c) =
                               (g.at(r, c) - yv.at(r, c) * dot) / norms[r];
                       }
                       t.AccumulateGrad(xi, dx);
                     });
}

Var BceLoss(const Var& probs, const Tensor& labels) {
  const Tensor& pv = probs.value();
  CheckSameShape(pv, labels, "BceLoss");
  if (pv.size() == 0) throw ShapeError("BceLoss: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < pv.size(); ++i) {
    double p = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
    double y = labels[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  double n = static_cast<double>(pv.size());
  size_t pi = probs.id();
  return TapeOf(probs).Record(
      Tensor::Scalar(sum / n), {probs},
      [pi, labels, n](Tape& t, const Tensor& g) {
        const Tensor& pv = t.value(pi);
        Tensor dp(pv.shape());
        for (size_t i = 0; i < pv.size(); ++i) {
          double p = pv[i];
          if (p < kBceClamp || p > 1.0 - kBceClamp) continue;
          double y = labels[i];
          dp[i] = g[0] * (-y / p + (1.0 - y) / (1.0 - p)) / n;
        }
        t.AccumulateGrad(pi, dp);
      });
}

Var SoftmaxCrossEntropy(const Var& logits, const std::vector<int>& targets) {
  const Tensor& lv = logits.value();
  if (targets.size() != lv.rows()) {
    throw ShapeError("SoftmaxCrossEntropy: " + std::to_string(targets.size()) +
                     " targets for logits " + Dims(lv));
  }
  Tensor prob(lv.shape());
  double loss = 0.0;
  for (size_t r = 0; r < lv.rows(); ++r) {
    auto in = lv.row(r);
    int tgt = targets[r];
    if (tgt < 0 || static_cast<size_t>(tgt) >= lv.cols()) {
      throw ShapeError("SoftmaxCrossEntropy: target " + std::to_string(tgt) +
                       " out of range for " + Dims(lv));
    }
    double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (double v : in) s += std::exp(v - m);
    double lse = m + std::log(s);
    loss += lse - in[tgt];
    for (size_t c = 0; c < in.size(); ++c) prob.at(r, c) = std::exp(in[c] - lse);
  }
  double n = static_cast<double>(lv.rows());
  size_t li = logits.id();
  return TapeOf(logits).Record(
      Tensor::Scalar(loss / n), {logits},
      [li, targets, n, prob = std::move(prob)](Tape& t, const Tensor& g) {
        Tensor d = prob;
        for (size_t r = 0; r < d.rows(); ++r) d.at(r, targets[r]) -= 1.0;
        for (double& v : d.values()) v *= g[0] / n;
        t.AccumulateGrad(li, d);
      });
}

}  // namespace avsd::nn
