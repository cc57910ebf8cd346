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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "avsd/autograd.h"
#include "avsd/common.h"
#include "avsd/layers.h"
#include "avsd/ops.h"
#include "avsd/params.h"
#include "test_util.h"

namespace avsd {
namespace {

using testing::AllNames;
using testing::CheckGradients;
using testing::In;
using testing::Project;
using testing::RandomMatrix;

TEST(OpsTest, SoftmaxOfConstantsIsUniform) {
  Tape t(false);
  Var y = nn::Softmax(t.Constant(Tensor::FromRows({{0, 0, 0, 0}})), 1);
  for (size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y.value()[i], 0.25);
}

TEST(OpsTest, SoftmaxRowsSumToOne) {
  Tape t(false);
  Var y = nn::Softmax(t.Constant(RandomMatrix(5, 7, 3, 10.0)), 1);
  for (size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (size_t c = 0; c < 7; ++c) {
      EXPECT_GT(y.value().at(r, c), 0.0);
      EXPECT_LT(y.value().at(r, c), 1.0);
      s += y.value().at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(OpsTest, LayerNormOfConstantIsBeta) {
  Tape t(false);
  Var x = t.Constant(Tensor::FromRows({{3, 3, 3}}));
  Var g = t.Constant(Tensor::FromRows({{2, 5, 7}}));
  Var b = t.Constant(Tensor::FromRows({{0.1, -0.2, 0.3}}));
  Var y = nn::LayerNorm(x, g, b);
  EXPECT_DOUBLE_EQ(y.value()[0], 0.1);
  EXPECT_DOUBLE_EQ(y.value()[1], -0.2);
  EXPECT_DOUBLE_EQ(y.value()[2], 0.3);
}

TEST(OpsTest, DepthwiseConvWithCenterTapIsIdentity) {
  Tape t(false);
  Tensor x = RandomMatrix(6, 3, 5);
  Tensor k = Tensor::FromRows({{0, 0, 0}, {1, 1, 1}, {0, 0, 0}});
  Var y = nn::DepthwiseConv1d(t.Constant(x), t.Constant(k));
  EXPECT_EQ(y.value(), x);
}

TEST(OpsTest, MeanStdPoolOfConstantSequence) {
  Tape t(false);
  Tensor x = Tensor::Matrix(9, 2);
  for (size_t r = 0; r < 9; ++r) {
    x.at(r, 0) = 1.5;
    x.at(r, 1) = -4.0;
  }
  Var y = nn::MeanStdPool(t.Constant(x));
  ASSERT_EQ(y.cols(), 4u);
  EXPECT_DOUBLE_EQ(y.value()[0], 1.5);
  EXPECT_DOUBLE_EQ(y.value()[1], -4.0);
  EXPECT_EQ(y.value()[2], 0.0);
  EXPECT_EQ(y.value()[3], 0.0);
}

TEST(OpsTest, ShapeMismatchNamesBothShapes) {
  Tape t(false);
  try {
    nn::Add(t.Constant(Tensor::Matrix(2, 3)), t.Constant(Tensor::Matrix(3, 2)));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
}

TEST(AutogradTest, NonScalarLossThrows) {
  ParameterStore s;
  s.set_allow_create(true);
  Tape t;
  Var w = t.Param(s, "w", {2, 2}, InitKind::kXavier);
  EXPECT_THROW(t.Backward(w, s), Error);
}

TEST(AutogradTest, LinearSumGradientIsInputBroadcast) {
  ParameterStore s;
  s.set_allow_create(true);
  Tape t;
  Tensor x = Tensor::FromRows({{1.0, -2.0, 0.5}});
  Var w = t.Param(s, "w", {3, 2}, InitKind::kXavier);
  Var loss = nn::SumAll(nn::MatMul(t.Constant(x), w));
  const Gradients g = t.Backward(loss, s);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(g.at("w").at(i, 0), x[i]);
    EXPECT_DOUBLE_EQ(g.at("w").at(i, 1), x[i]);
  }
}

TEST(AutogradTest, UnreachedParameterGetsZeroGradient) {
  ParameterStore s;
  s.set_allow_create(true);
  s.GetOrCreate("unused", {2, 2}, InitKind::kXavier);
  Tape t;
  Var w = t.Param(s, "w", {1, 1}, InitKind::kOne);
  const Gradients g = t.Backward(nn::SumAll(w), s);
  for (size_t i = 0; i < 4; ++i) EXPECT_EQ(g.at("unused")[i], 0.0);
}

TEST(AutogradTest, FrozenPrefixGetsNoGradient) {
  ParameterStore s;
  s.set_allow_create(true);
  Tape t;
  t.set_frozen_prefixes({"frozen"});
  Var a = t.Param(s, "frozen/w", {1, 1}, InitKind::kOne);
  Var b = t.Param(s, "live/w", {1, 1}, InitKind::kOne);
  const Gradients g = t.Backward(nn::SumAll(nn::Mul(a, b)), s);
  EXPECT_EQ(g.at("frozen/w")[0], 0.0);
  EXPECT_EQ(g.at("live/w")[0], 1.0);
  const auto seen = t.TrainableParamsSeen();
  EXPECT_EQ(seen, std::vector<std::string>{"live/w"});
}

// Finite-difference checks, one per op, on random 3-8 dimensional inputs.
struct OpCase {
  const char* name;
  std::vector<std::pair<std::string, Shape>> inputs;
  std::function<Var(Tape&, ParameterStore&)> body;
};

class OpGradientTest : public ::testing::TestWithParam<int> {};

std::vector<OpCase> OpCases() {
  auto in = [](const char* n) { return std::string(n); };
  return {
      {"linear", {{"x", {4, 5}}, {"w", {5, 3}}, {"b", {1, 3}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::Linear(In(t, s, in("x")), In(t, s, in("w")), In(t, s, in("b")));
       }},
      {"layer_norm", {{"x", {3, 6}}, {"g", {1, 6}}, {"b", {1, 6}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::LayerNorm(In(t, s, in("x")), In(t, s, in("g")), In(t, s, in("b")));
       }},
      {"softmax_rows", {{"x", {4, 5}}},
       [=](Tape& t, ParameterStore& s) { return nn::Softmax(In(t, s, in("x")), 1); }},
      {"softmax_cols", {{"x", {4, 5}}},
       [=](Tape& t, ParameterStore& s) { return nn::Softmax(In(t, s, in("x")), 0); }},
      {"relu", {{"x", {3, 7}}},
       [=](Tape& t, ParameterStore& s) { return nn::Relu(In(t, s, in("x"))); }},
      {"swish", {{"x", {3, 7}}},
       [=](Tape& t, ParameterStore& s) { return nn::Swish(In(t, s, in("x"))); }},
      {"sigmoid", {{"x", {3, 7}}},
       [=](Tape& t, ParameterStore& s) { return nn::Sigmoid(In(t, s, in("x"))); }},
      {"tanh", {{"x", {3, 7}}},
       [=](Tape& t, ParameterStore& s) { return nn::Tanh(In(t, s, in("x"))); }},
      {"glu", {{"x", {5, 6}}},
       [=](Tape& t, ParameterStore& s) { return nn::Glu(In(t, s, in("x"))); }},
      {"depthwise_conv", {{"x", {8, 3}}, {"k", {5, 3}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::DepthwiseConv1d(In(t, s, in("x")), In(t, s, in("k")));
       }},
      {"conv1d_dilated", {{"x", {8, 3}}, {"w", {9, 4}}, {"b", {1, 4}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::Conv1d(In(t, s, in("x")), In(t, s, in("w")), In(t, s, in("b")), 3, 2);
       }},
      {"mean_std_pool", {{"x", {7, 4}}},
       [=](Tape& t, ParameterStore& s) { return nn::MeanStdPool(In(t, s, in("x"))); }},
      {"l2_normalize", {{"x", {3, 5}}},
       [=](Tape& t, ParameterStore& s) { return nn::L2NormalizeRows(In(t, s, in("x"))); }},
      {"matmul_trans_b", {{"a", {3, 4}}, {"b", {5, 4}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::MatMulTransB(In(t, s, in("a")), In(t, s, in("b")));
       }},
      {"mul_row_col", {{"x", {4, 3}}, {"r", {1, 3}}, {"c", {4, 1}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::MulCol(nn::MulRow(In(t, s, in("x")), In(t, s, in("r"))),
                           In(t, s, in("c")));
       }},
      {"concat_slice_repeat", {{"a", {3, 2}}, {"b", {3, 4}}},
       [=](Tape& t, ParameterStore& s) {
         Var c = nn::ConcatCols({In(t, s, in("a")), In(t, s, in("b"))});
         return nn::RepeatRows(nn::SliceCols(c, 1, 4), 3);
       }},
      {"bce", {{"p", {2, 5}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::BceLoss(nn::Sigmoid(In(t, s, in("p"))),
                            testing::RandomLabels(2, 5, 77));
       }},
      {"softmax_ce", {{"z", {4, 3}}},
       [=](Tape& t, ParameterStore& s) {
         return nn::SoftmaxCrossEntropy(In(t, s, in("z")), {0, 2, 1, 2});
       }},
  };
}

TEST_P(OpGradientTest, MatchesFiniteDifferences) {
  const OpCase c = OpCases()[GetParam()];
  ParameterStore s;
  uint64_t seed = 100;
  for (const auto& [name, shape] : c.inputs) {
    Tensor v = RandomMatrix(shape[0], shape[1], seed++);
    if (std::string(c.name) == "relu") {
      // Keep inputs away from the kink.
      for (size_t i = 0; i < v.size(); ++i) v[i] += v[i] > 0 ? 0.1 : -0.1;
    }
    if (name == "g") {
      for (size_t i = 0; i < v.size(); ++i) v[i] += 1.0;
    }
    s.Set(name, v);
  }
  auto loss = [&](Tape& t, ParameterStore& st) {
    Var y = c.body(t, st);
    return y.value().size() == 1 ? y : Project(y, 999);
  };
  const auto r = CheckGradients(s, loss, AllNames(s));
  EXPECT_LT(r.max_rel_error, 1e-6) << c.name << ": " << r.worst;
  EXPECT_GT(r.checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradientTest,
                         ::testing::Range(0, static_cast<int>(OpCases().size())),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return std::string(OpCases()[info.param].name);
                         });

TEST(AttentionTest, IdenticalKeysGiveUniformWeights) {
  ParameterStore s(3);
  s.set_allow_create(true);
  Tape t(false);
  nn::Scope sc(t, s, "mha");
  Tensor k = Tensor::Matrix(5, 8);
  Tensor row = RandomMatrix(1, 8, 4);
  for (size_t r = 0; r < 5; ++r) {
    for (size_t c = 0; c < 8; ++c) k.at(r, c) = row[c];
  }
  std::vector<Tensor> w;
  nn::MultiHeadAttention(sc, t.Constant(RandomMatrix(3, 8, 5)), t.Constant(k),
                         t.Constant(RandomMatrix(5, 8, 6)), 2, &w);
  ASSERT_EQ(w.size(), 2u);
  for (const auto& m : w) {
    for (size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], 0.2, 1e-15);
  }
}

TEST(AttentionTest, SingleKeyIgnoresQuery) {
  ParameterStore s(3);
  s.set_allow_create(true);
  Tensor k = RandomMatrix(1, 8, 7), v = RandomMatrix(1, 8, 8);
  auto run = [&](uint64_t qseed) {
    Tape t(false);
    nn::Scope sc(t, s, "mha");
    return nn::MultiHeadAttention(sc, t.Constant(RandomMatrix(4, 8, qseed)),
                                  t.Constant(k), t.Constant(v), 4)
        .value();
  };
  const Tensor a = run(1), b = run(2);
  EXPECT_EQ(a, b);
}

TEST(AttentionTest, DivisibilityIsAConfigError) {
  ParameterStore s;
  s.set_allow_create(true);
  Tape t(false);
  nn::Scope sc(t, s, "mha");
  Var x = t.Constant(Tensor::Matrix(2, 6));
  EXPECT_THROW(nn::MultiHeadAttention(sc, x, x, x, 4), ConfigError);
}

TEST(AttentionTest, InvariantToJointKeyValuePermutation) {
  ParameterStore s(9);
  s.set_allow_create(true);
  Tensor q = RandomMatrix(3, 8, 1), k = RandomMatrix(4, 8, 2),
         v = RandomMatrix(4, 8, 3);
  const std::vector<size_t> perm = {2, 0, 3, 1};
  Tensor kp = k, vp = v;
  for (size_t r = 0; r < 4; ++r) {
    for (size_t c = 0; c < 8; ++c) {
      kp.at(r, c) = k.at(perm[r], c);
      vp.at(r, c) = v.at(perm[r], c);
    }
  }
  auto run = [&](const Tensor& kk, const Tensor& vv) {
    Tape t(false);
    nn::Scope sc(t, s, "mha");
    return nn::MultiHeadAttention(sc, t.Constant(q), t.Constant(kk),
                                  t.Constant(vv), 2)
        .value();
  };
  const Tensor a = run(k, v), b = run(kp, vp);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

// Straight-line re-derivation of multi-head attention with plain loops.
Tensor OracleAttention(const ParameterStore& s, const Tensor& q,
                       const Tensor& k, const Tensor& v, size_t heads) {
  auto proj = [&](const Tensor& x, const std::string& p) {
    const Tensor& w = s.Get("mha/" + p + "/w");
    const Tensor& b = s.Get("mha/" + p + "/b");
    Tensor y = Tensor::Matrix(x.rows(), w.cols());
    for (size_t r = 0; r < x.rows(); ++r) {
      for (size_t o = 0; o < w.cols(); ++o) {
        double acc = b[o];
        for (size_t i = 0; i < x.cols(); ++i) acc += x.at(r, i) * w.at(i, o);
        y.at(r, o) = acc;
      }
    }
    return y;
  };
  const Tensor qp = proj(q, "wq"), kp = proj(k, "wk"), vp = proj(v, "wv");
  const size_t d = q.cols(), dh = d / heads;
  Tensor cat = Tensor::Matrix(q.rows(), d);
  for (size_t h = 0; h < heads; ++h) {
    for (size_t i = 0; i < q.rows(); ++i) {
      std::vector<double> score(k.rows());
      double mx = -1e300;
      for (size_t j = 0; j < k.rows(); ++j) {
        double dot = 0;
        for (size_t c = 0; c < dh; ++c) {
          dot += qp.at(i, h * dh + c) * kp.at(j, h * dh + c);
        }
        score[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, score[j]);
      }
      double z = 0;
      for (double& sc : score) z += (sc = std::exp(sc - mx));
      for (size_t c = 0; c < dh; ++c) {
        double acc = 0;
        for (size_t j = 0; j < k.rows(); ++j) {
          acc += score[j] / z * vp.at(j, h * dh + c);
        }
        cat.at(i, h * dh + c) = acc;
      }
    }
  }
  return proj(cat, "wo");
}

TEST(AttentionTest, MatchesStraightLineOracle) {
  ParameterStore s(21);
  s.set_allow_create(true);
  Tensor q = RandomMatrix(3, 8, 11), k = RandomMatrix(4, 8, 12),
         v = RandomMatrix(4, 8, 13);
  Tape t(false);
  nn::Scope sc(t, s, "mha");
  const Tensor got = nn::MultiHeadAttention(sc, t.Constant(q), t.Constant(k),
                                            t.Constant(v), 2)
                         .value();
  // Random biases so the oracle exercises them too.
  const Tensor want = OracleAttention(s, q, k, v, 2);
  for (size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(AttentionTest, GradientCheck) {
  ParameterStore s(5);
  s.set_allow_create(true);
  s.Set("q", RandomMatrix(3, 8, 1));
  s.Set("kv", RandomMatrix(4, 8, 2));
  auto loss = [](Tape& t, ParameterStore& st) {
    nn::Scope sc(t, st, "mha");
    Var kv = In(t, st, "kv");
    return Project(nn::MultiHeadAttention(sc, In(t, st, "q"), kv, kv, 2), 5);
  };
  { Tape t; loss(t, s); }
  s.set_allow_create(false);
  // Non-zero biases.
  for (const auto& n : s.NamesWithPrefix("mha/")) {
    if (n.back() == 'b') s.Set(n, RandomMatrix(1, 8, std::hash<std::string>{}(n)));
  }
  const auto r = CheckGradients(s, loss, AllNames(s));
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(BlockGradientTest, TransformerConformerSqueezeExcite) {
  ParameterStore s(8);
  s.set_allow_create(true);
  s.Set("x", RandomMatrix(6, 8, 31));
  auto loss = [](Tape& t, ParameterStore& st) {
    nn::Scope sc(t, st);
    Var h = nn::TransformerBlock(sc.Sub("tf"), In(t, st, "x"), 2, 12);
    h = nn::ConformerBlock(sc.Sub("cf"), h, 2, 12, 3);
    h = nn::SqueezeExcite(sc.Sub("se"), h, 4);
    return Project(h, 3);
  };
  { Tape t; loss(t, s); }
  s.set_allow_create(false);
  const auto r = CheckGradients(s, loss, AllNames(s), 8);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(ParamsTest, InitIsDeterministicAndSeedDependent) {
  auto make = [](uint64_t seed) {
    ParameterStore s(seed);
    s.set_allow_create(true);
    s.GetOrCreate("a/w", {4, 3}, InitKind::kXavier);
    s.GetOrCreate("a/b", {1, 3}, InitKind::kZero);
    s.GetOrCreate("a/gamma", {1, 3}, InitKind::kOne);
    return s;
  };
  EXPECT_EQ(make(1), make(1));
  EXPECT_FALSE(make(1) == make(2));
  const ParameterStore s = make(5);
  const double a = std::sqrt(6.0 / 7.0);
  for (size_t i = 0; i < 12; ++i) EXPECT_LE(std::abs(s.Get("a/w")[i]), a);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(s.Get("a/b")[i], 0.0);
    EXPECT_EQ(s.Get("a/gamma")[i], 1.0);
  }
}

TEST(ParamsTest, CheckpointRoundTripIsBitExact) {
  ParameterStore s(4);
  s.set_allow_create(true);
  s.GetOrCreate("x/w", {3, 5}, InitKind::kXavier);
  s.Set("odd", Tensor({2, 2, 2}, std::vector<double>{1e-300, -0.0, 1.0 / 3, 7,
                                                      8, 9, 10, 11}));
  std::stringstream ss;
  s.Write(ss);
  const ParameterStore r = ParameterStore::Read(ss, "memory");
  EXPECT_EQ(r, s);
  EXPECT_TRUE(std::signbit(r.Get("odd")[1]));
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "AVSD");
}

TEST(ParamsTest, CorruptCheckpointIsRejected) {
  std::stringstream ss("NOPE");
  EXPECT_THROW(ParameterStore::Read(ss, "memory"), Error);
}

}  // namespace
}  // namespace avsd
