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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avsd/config.h"
#include "avsd/decodepipe.h"
#include "avsd/pipeline.h"
#include "avsd/rng.h"
#include "avsd/rttm.h"
#include "avsd/scorer.h"
#include "avsd/secondsv.h"
#include "avsd/synthgen.h"
#include "avsd/trainer.h"
#include "model_fixtures.h"
#include "oracles.h"
#include "test_util.h"

namespace avsd {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double Since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void Report(const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail
            << std::endl;
  if (!o.pass) ++g_failures;
}

Outcome ScorerOracle() {
  const auto t0 = Clock::now();
  Rng rng(2026);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const auto ref = testing::RandomGridAnnotation(rng, "s", 3, 6);
    const auto hyp = testing::RandomGridAnnotation(rng, "s", 3, 6);
    const auto r = ScoreDer(ref, hyp);
    const auto c = oracle::CountPerMillisecond(ref, hyp);
    worst = std::max({worst, std::abs(r.fa_s - c.fa / 1000.0),
                      std::abs(r.miss_s - c.miss / 1000.0),
                      std::abs(r.spkerr_s - c.spkerr / 1000.0)});
  }
  const double secs = Since(t0);
  return {worst <= 1e-9 && secs < 30.0,
          Fmt("200 sessions, max |diff| %.3g s, %.1f s", worst, secs)};
}

Outcome ResultsTableArithmetic() {
  struct Row {
    const char* name;
    double fa, miss, spkerr, der;
  };
  const Row rows[] = {
      {"Baseline AVSD", 4.01, 5.86, 3.22, 13.09},
      {"ResNet-Transformer", 1.36, 6.23, 1.92, 9.54},
      {"ResNet-Conformer", 2.01, 5.50, 2.10, 9.61},
      {"ResNet-CrossAttention", 1.35, 6.26, 1.95, 9.57},
      {"ECAPA-Transformer", 1.64, 5.77, 1.89, 9.30},
      {"+ Decoding Frame shift (100)", 1.64, 5.62, 1.89, 9.15},
      {"+ Median Filtering", 2.31, 4.75, 1.86, 8.92},
      {"+ Secondary SV", 1.95, 4.79, 1.78, 8.53},
  };
  std::string bad;
  for (const auto& r : rows) {
    const double der = DerFromComponents(r.fa, r.miss, r.spkerr);
    if (std::abs(der - r.der) > 0.01 + 1e-9) {
      bad += std::string(bad.empty() ? "" : "; ") + r.name +
             Fmt(" sums to %.2f, printed %.2f", der, r.der);
    }
  }
  return {bad.empty(), bad.empty() ? "8 rows within 0.01" : bad};
}

Outcome GradientChecks() {
  bool ok = true;
  std::string detail;
  for (auto kind : {DecoderKind::kTransformer, DecoderKind::kConformer,
                    DecoderKind::kCrossAttention}) {
    const auto t0 = Clock::now();
    const auto r = testing::DecoderGradientCheck(kind, /*through_encoder=*/true);
    const double secs = Since(t0);
    ok &= r.max_rel_error < 1e-5 && secs < 60.0;
    detail += ToString(kind) + Fmt(" %.2g (%.1f s) ", r.max_rel_error, secs);
  }
  return {ok, detail};
}

std::string Serialize(const ParameterStore& p, const std::string& prefix) {
  std::ostringstream os;
  ExtractPrefix(p, prefix).Write(os);
  return os.str();
}

Outcome FreezeContract(const std::string& work_dir) {
  const ModelConfig model = testing::ToyModel();
  const std::string ckpt = work_dir + "/freeze_init.ckpt";
  InitParameters(model, 11).Save(ckpt);
  const ParameterStore saved = ParameterStore::Load(ckpt);
  const auto data = testing::ToyTrainingData(model, saved, 2, 12.0, 70);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.chunk_frames = 200;
  cfg.epochs = 1;
  cfg.steps_per_epoch = 50;
  TrainingState st{saved, Adam(cfg.adam)};
  JointTrain(model, cfg, data, &st);
  const ParameterStore reloaded = ParameterStore::Load(ckpt);
  bool ok = st.global_step == 50;
  for (const char* prefix : {"lip_encoder/", "speaker_extractor/"}) {
    ok &= Serialize(st.params, prefix) == Serialize(reloaded, prefix);
  }
  const bool decoder_moved =
      Serialize(st.params, "decoder/") != Serialize(reloaded, "decoder/");
  return {ok && decoder_moved,
          Fmt("%.0f steps; frozen modules byte-identical: ", st.global_step) +
              (ok ? "yes" : "no") +
              "; decoder updated: " + (decoder_moved ? "yes" : "no")};
}

Outcome DecodePipeExactness() {
  const WindowPredictor model = [](size_t start, size_t len) {
    Tensor y = Tensor::Matrix(2, len);
    for (size_t r = 0; r < 2; ++r)
      for (size_t i = 0; i < len; ++i)
        y.at(r, i) = 0.5 + 0.5 * std::sin(0.37 * (start + i) + 0.11 * i + r);
    return y;
  };
  bool concat = true, constant = true;
  double worst = 0;
  {
    DecodeConfig c;
    c.chunk_frames = c.shift_frames = 600;
    const auto out = SlidingWindowDecode(model, 1800, c);
    for (size_t w = 0; w < 3; ++w) {
      const Tensor y = model(600 * w, 600);
      for (size_t r = 0; r < 2; ++r)
        for (size_t i = 0; i < 600; ++i)
          concat &= out.probs.at(r, 600 * w + i) == y.at(r, i);
    }
  }
  const WindowPredictor flat = [](size_t, size_t len) {
    return Tensor::Matrix(2, len, 0.37);
  };
  for (size_t shift : {1, 7, 100, 250, 600}) {
    for (size_t t : {599, 1000, 1234}) {
      DecodeConfig c;
      c.chunk_frames = 600;
      c.shift_frames = shift;
      const auto kept = SlidingWindowDecode(flat, t, c);
      for (double v : kept.probs.vec()) constant &= v == 0.37;
      const auto out = SlidingWindowDecode(model, t, c);
      const auto windows = oracle::EnumerateWindows(t, 600, shift);
      std::vector<Tensor> preds;
      for (auto [s, len] : windows) preds.push_back(model(s, len));
      for (size_t f = 0; f < t; ++f) {
        for (size_t r = 0; r < 2; ++r) {
          double sum = 0;
          int n = 0;
          for (size_t k = 0; k < windows.size(); ++k) {
            const auto [s, len] = windows[k];
            if (f < s || f >= s + len) continue;
            sum += preds[k].at(r, f - s);
            ++n;
          }
          worst = std::max(worst, n ? std::abs(out.probs.at(r, f) - sum / n) : 1.0);
        }
      }
    }
  }
  return {concat && constant && worst <= 1e-12,
          std::string("concat ") + (concat ? "exact" : "differs") +
              ", constant " + (constant ? "kept" : "broken") +
              Fmt(", oracle max |diff| %.3g", worst)};
}

Outcome RttmRoundTrip() {
  Rng rng(4242);
  int mismatches = 0, unstable = 0, n = 0;
  while (n < 1000) {
    auto a = testing::RandomGridAnnotation(rng, "sess", 3, 6);
    if (a.entries.empty()) continue;
    ++n;
    const std::string text = WriteRttm(a);
    if (ParseRttm(text).at("sess") != a) ++mismatches;
    auto shuffled = a;
    for (size_t k = shuffled.entries.size(); k > 1; --k)
      std::swap(shuffled.entries[k - 1], shuffled.entries[rng.Below(k)]);
    if (WriteRttm(shuffled) != text) ++unstable;
  }
  return {mismatches == 0 && unstable == 0,
          Fmt("1000 annotations, %.0f round-trip mismatches, %.0f unstable",
              mismatches, unstable)};
}

Outcome PermutationEquivariance() {
  bool ok = true;
  std::string detail;
  for (auto kind : {DecoderKind::kTransformer, DecoderKind::kConformer,
                    DecoderKind::kCrossAttention}) {
    testing::DecoderFixture f(kind, 5, /*through_encoder=*/true);
    f.speakers = 3;
    f.cfg.num_speakers = 3;
    f.store.Set(testing::DecoderFixture::LipName(2),
                testing::RandomMatrix(f.frames, f.lip_dim + 1, 9));
    f.store.Set("in/utt", testing::RandomMatrix(3, f.utt_dim, 10));
    f.Init();
    std::vector<size_t> order = {0, 1, 2};
    Tape t0(false);
    const Tensor base = f.Forward(t0, f.store, order).value();
    bool exact = true;
    do {
      Tape t(false);
      const Tensor y = f.Forward(t, f.store, order).value();
      for (size_t k = 0; k < 3; ++k)
        for (size_t c = 0; c < f.frames; ++c)
          exact &= y.at(k, c) == base.at(order[k], c);
    } while (std::next_permutation(order.begin(), order.end()));
    ok &= exact;
    detail += ToString(kind) + (exact ? " exact " : " differs ");
  }
  return {ok, detail + "(all 6 permutations of 3 speakers)"};
}

// Restoration of corrupted reference labels on fresh meetings, using the
// extractor of a trained demo model.
Outcome SvRecovery(const PipelineConfig& cfg, const std::string& model_path,
                   const std::string& work_dir) {
  if (!fs::exists(model_path)) return {false, "no trained model at " + model_path};
  const ParameterStore params = LoadModelParameters(model_path);
  CorpusOptions opts = cfg.corpus;
  opts.seed = DeriveSeed(cfg.corpus.seed, 0x5eed);
  opts.num_meetings = 10;
  opts.out_dir = work_dir + "/sv_corpus";
  fs::remove_all(opts.out_dir);
  const auto records = GenerateCorpus(opts);
  const auto embed = MakeExtractorEmbedding(cfg.model, params);
  RestorationStats total;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto ref = LoadReference(records[i]);
    const auto c = CorruptSingleSpeakerLabels(
        ref, 0.1, DeriveSeed(opts.seed, i), cfg.sv.min_segment_s);
    const auto r = CorrectSpeakers(c.annotation, LoadAudio(records[i]), embed,
                                   cfg.sv);
    const auto st = EvaluateRestoration(c, r.annotation);
    total.corrupted += st.corrupted;
    total.restored += st.restored;
    total.clean += st.clean;
    total.disturbed += st.disturbed;
  }
  return {total.corrupted > 0 && total.restored_fraction() >= 0.9 &&
              total.disturbed_fraction() <= 0.01,
          Fmt("restored %.0f/%.0f, disturbed %.0f/%.0f clean (10 meetings)",
              total.restored, total.corrupted, total.disturbed, total.clean)};
}

}  // namespace
}  // namespace avsd

int main(int argc, char** argv) {
  using namespace avsd;
  CLI::App app{"avsd acceptance checks"};
  std::string work_dir = "acceptance_work";
  int seeds = 5;
  bool skip_demo = false;
  app.add_option("--work-dir", work_dir, "Scratch directory");
  app.add_option("--seeds", seeds, "Demo seeds for the ablation checks");
  app.add_flag("--skip-demo", skip_demo, "Only run the fast checks");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work_dir);

  Report("scorer oracle equivalence", ScorerOracle());
  Report("results table arithmetic", ResultsTableArithmetic());
  Report("decoder gradient checks", GradientChecks());
  Report("freeze contract", FreezeContract(work_dir));
  Report("decode-pipe exactness", DecodePipeExactness());
  Report("rttm round-trip", RttmRoundTrip());
  Report("permutation equivariance", PermutationEquivariance());
  if (skip_demo) return g_failures == 0 ? 0 : 1;

  std::vector<DemoReport> reports;
  for (int s = 0; s < seeds; ++s) {
    const auto cfg = WithSeed(DefaultPipelineConfig(), static_cast<uint64_t>(s));
    const std::string dir = work_dir + "/demo_seed" + std::to_string(s);
    fs::remove_all(dir);
    reports.push_back(RunDemo(cfg, dir));
    const auto& r = reports.back();
    std::cout << "seed " << s << Fmt(" (%.0f s)\n", r.seconds) << r.ToTable()
              << std::flush;
  }
  const DemoReport& r0 = reports.front();
  const double trained = r0.rows.back().report.der_pct;
  const double untrained = r0.untrained.der_pct;
  Report("desk-scale end-to-end",
         {trained < 15.0 && untrained > 35.0 && r0.seconds < 900.0,
          Fmt("seed 0: trained DER %.2f%%, untrained %.2f%%, %.0f s", trained,
              untrained, r0.seconds)});

  int median_wins = 0, sv_wins = 0;
  std::string detail;
  for (const auto& r : reports) {
    const double before = r.rows[1].report.der_pct;
    const double after = r.rows[2].report.der_pct;
    median_wins += after < before;
    sv_wins += r.corrupted_corrected.spkerr_pct < r.corrupted.spkerr_pct;
    detail += Fmt(" [median %.2f->%.2f, sv spkerr %.2f->%.2f]", before, after,
                  r.corrupted.spkerr_pct, r.corrupted_corrected.spkerr_pct);
  }
  const int n = static_cast<int>(reports.size());
  Report("ablation direction",
         {n == 5 && median_wins >= 4 && sv_wins == 5,
          Fmt("median helps %.0f/%.0f, SV helps %.0f/%.0f", median_wins, n,
              sv_wins, n) +
              detail});

  Report("secondary-sv recovery",
         SvRecovery(WithSeed(DefaultPipelineConfig(), 0),
                    work_dir + "/demo_seed0/model/final.ckpt", work_dir));
  return g_failures == 0 ? 0 : 1;
}
