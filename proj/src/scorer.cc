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

#include "avsd/scorer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "avsd/common.h"

namespace avsd {

namespace {

using Interval = std::pair<int64_t, int64_t>;

// Per-speaker merged tick intervals.
std::map<std::string, std::vector<Interval>> ToTicks(
    const DiarizationAnnotation& ann, double res) {
  std::map<std::string, std::vector<Interval>> out;
  for (const auto& e : ann.entries) {
    int64_t a = std::llround(e.onset_s / res);
    int64_t b = std::llround(e.end_s() / res);
    if (b > a) out[e.speaker].push_back({a, b});
  }
  for (auto& [_, v] : out) {
    std::sort(v.begin(), v.end());
    std::vector<Interval> merged;
    for (const auto& iv : v) {
      if (!merged.empty() && iv.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, iv.second);
      } else {
        merged.push_back(iv);
      }
    }
    v = std::move(merged);
  }
  return out;
}

// Walks a sorted, disjoint interval list with monotonically increasing
// query points.
class ActivityCursor {
 public:
  explicit ActivityCursor(const std::vector<Interval>* iv) : iv_(iv) {}
  bool ActiveAt(int64_t t) {
    while (idx_ < iv_->size() && (*iv_)[idx_].second <= t) ++idx_;
    return idx_ < iv_->size() && (*iv_)[idx_].first <= t;
  }

 private:
  const std::vector<Interval>* iv_;
  size_t idx_ = 0;
};

double Pct(int64_t num, int64_t den) {
  if (den == 0) {
    return num == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

void FillPercentages(DerReport* r) {
  r->fa_pct = Pct(r->fa_ticks, r->speech_ticks);
  r->miss_pct = Pct(r->miss_ticks, r->speech_ticks);
  r->spkerr_pct = Pct(r->spkerr_ticks, r->speech_ticks);
  r->der_pct = Pct(r->fa_ticks + r->miss_ticks + r->spkerr_ticks,
                   r->speech_ticks);
  double res = r->resolution_s;
  r->fa_s = r->fa_ticks * res;
  r->miss_s = r->miss_ticks * res;
  r->spkerr_s = r->spkerr_ticks * res;
  r->scored_speech_s = r->speech_ticks * res;
  r->scored_time_s = r->scored_ticks * res;
}

}  // namespace

SpeakerMapping ParseSpeakerMapping(const std::string& name) {
  if (name == "identity") return SpeakerMapping::kIdentity;
  if (name == "optimal") return SpeakerMapping::kOptimal;
  throw ConfigError("unknown speaker mapping \"" + name +
                    "\" (expected identity|optimal)");
}

std::string ToString(SpeakerMapping mapping) {
  return mapping == SpeakerMapping::kIdentity ? "identity" : "optimal";
}

std::vector<int> MaxWeightAssignment(
    const std::vector<std::vector<int64_t>>& weights) {
  size_t rows = weights.size();
  size_t cols = rows ? weights[0].size() : 0;
  std::vector<int> result(rows, -1);
  if (rows == 0 || cols == 0) return result;
  bool transpose = cols > rows;
  size_t big = transpose ? cols : rows;
  size_t small = transpose ? rows : cols;
  if (small > 16) {
    throw Error("speaker assignment limited to 16 speakers on one side");
  }
  auto w = [&](size_t b, size_t s) {
    return transpose ? weights[s][b] : weights[b][s];
  };
  size_t states = size_t{1} << small;
  constexpr int64_t kNeg = std::numeric_limits<int64_t>::min() / 4;
  // best[i][mask]: best total using the first i big-side items with the
  // small-side items in `mask` taken.
  std::vector<std::vector<int64_t>> best(big + 1,
                                         std::vector<int64_t>(states, kNeg));
  std::vector<std::vector<int>> choice(big + 1, std::vector<int>(states, -1));
  best[0][0] = 0;
  for (size_t i = 0; i < big; ++i) {
    for (size_t mask = 0; mask < states; ++mask) {
      if (best[i][mask] == kNeg) continue;
      if (best[i][mask] > best[i + 1][mask]) {
        best[i + 1][mask] = best[i][mask];
        choice[i + 1][mask] = -1;
      }
      for (size_t j = 0; j < small; ++j) {
        if (mask & (size_t{1} << j)) continue;
        size_t next = mask | (size_t{1} << j);
        int64_t v = best[i][mask] + w(i, j);
        if (v > best[i + 1][next]) {
          best[i + 1][next] = v;
          choice[i + 1][next] = static_cast<int>(j);
        }
      }
    }
  }
  size_t mask = static_cast<size_t>(
      std::max_element(best[big].begin(), best[big].end()) - best[big].begin());
  for (size_t i = big; i > 0; --i) {
    int j = choice[i][mask];
    if (j >= 0) {
      if (transpose) {
        result[static_cast<size_t>(j)] = static_cast<int>(i - 1);
      } else {
        result[i - 1] = j;
      }
      mask &= ~(size_t{1} << j);
    }
  }
  return result;
}

DerReport ScoreDer(const DiarizationAnnotation& ref,
                   const DiarizationAnnotation& hyp,
                   const DerOptions& options) {
  if (ref.session_id != hyp.session_id) {
    throw Error("session mismatch: reference \"" + ref.session_id +
                "\" vs hypothesis \"" + hyp.session_id + "\"");
  }
  if (!(options.resolution_s > 0)) {
    throw ConfigError("scoring resolution must be positive");
  }
  if (options.collar_s < 0) throw ConfigError("collar must be non-negative");
  double res = options.resolution_s;
  auto ref_ticks = ToTicks(ref, res);
  auto hyp_ticks = ToTicks(hyp, res);

  std::vector<std::string> ref_names, hyp_names;
  std::vector<const std::vector<Interval>*> ref_iv, hyp_iv;
  for (const auto& [n, v] : ref_ticks) {
    ref_names.push_back(n);
    ref_iv.push_back(&v);
  }
  for (const auto& [n, v] : hyp_ticks) {
    hyp_names.push_back(n);
    hyp_iv.push_back(&v);
  }

  // Collar zones around every reference boundary.
  int64_t collar = std::llround(options.collar_s / res);
  std::vector<Interval> excluded;
  if (collar > 0) {
    for (const auto* v : ref_iv) {
      for (const auto& iv : *v) {
        excluded.push_back({iv.first - collar, iv.first + collar});
        excluded.push_back({iv.second - collar, iv.second + collar});
      }
    }
    std::sort(excluded.begin(), excluded.end());
    std::vector<Interval> merged;
    for (const auto& iv : excluded) {
      if (!merged.empty() && iv.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, iv.second);
      } else {
        merged.push_back(iv);
      }
    }
    excluded = std::move(merged);
  }

  std::set<int64_t> cuts;
  for (const auto* v : ref_iv)
    for (const auto& iv : *v) cuts.insert({iv.first, iv.second});
  for (const auto* v : hyp_iv)
    for (const auto& iv : *v) cuts.insert({iv.first, iv.second});
  for (const auto& iv : excluded) cuts.insert({iv.first, iv.second});
  std::vector<int64_t> points(cuts.begin(), cuts.end());

  // Elementary intervals with the active speaker sets, restricted to the
  // scored region.
  struct Piece {
    int64_t len;
    std::vector<int> ref_active, hyp_active;
  };
  std::vector<Piece> pieces;
  {
    std::vector<ActivityCursor> rc, hc;
    for (const auto* v : ref_iv) rc.emplace_back(v);
    for (const auto* v : hyp_iv) hc.emplace_back(v);
    ActivityCursor ex(&excluded);
    for (size_t i = 0; i + 1 < points.size(); ++i) {
      int64_t a = points[i], b = points[i + 1];
      if (ex.ActiveAt(a)) continue;
      Piece p{b - a, {}, {}};
      for (size_t r = 0; r < rc.size(); ++r)
        if (rc[r].ActiveAt(a)) p.ref_active.push_back(static_cast<int>(r));
      for (size_t h = 0; h < hc.size(); ++h)
        if (hc[h].ActiveAt(a)) p.hyp_active.push_back(static_cast<int>(h));
      if (!p.ref_active.empty() || !p.hyp_active.empty()) {
        pieces.push_back(std::move(p));
      }
    }
  }

  // hyp index -> ref index (or -1).
  std::vector<int> hyp_to_ref(hyp_names.size(), -1);
  if (options.mapping == SpeakerMapping::kIdentity) {
    for (size_t h = 0; h < hyp_names.size(); ++h) {
      auto it = std::find(ref_names.begin(), ref_names.end(), hyp_names[h]);
      if (it != ref_names.end()) {
        hyp_to_ref[h] = static_cast<int>(it - ref_names.begin());
      }
    }
  } else {
    std::vector<std::vector<int64_t>> overlap(
        hyp_names.size(), std::vector<int64_t>(ref_names.size(), 0));
    for (const auto& p : pieces)
      for (int h : p.hyp_active)
        for (int r : p.ref_active) overlap[h][r] += p.len;
    hyp_to_ref = MaxWeightAssignment(overlap);
  }

  DerReport report;
  report.resolution_s = res;
  for (size_t h = 0; h < hyp_names.size(); ++h) {
    if (hyp_to_ref[h] >= 0) {
      report.mapping[hyp_names[h]] = ref_names[static_cast<size_t>(hyp_to_ref[h])];
    }
  }

  std::vector<char> ref_on(ref_names.size());
  for (const auto& p : pieces) {
    int64_t nr = static_cast<int64_t>(p.ref_active.size());
    int64_t nh = static_cast<int64_t>(p.hyp_active.size());
    std::fill(ref_on.begin(), ref_on.end(), 0);
    for (int r : p.ref_active) ref_on[static_cast<size_t>(r)] = 1;
    int64_t correct = 0;
    for (int h : p.hyp_active) {
      int r = hyp_to_ref[static_cast<size_t>(h)];
      if (r >= 0 && ref_on[static_cast<size_t>(r)]) ++correct;
    }
    report.miss_ticks += std::max<int64_t>(0, nr - nh) * p.len;
    report.fa_ticks += std::max<int64_t>(0, nh - nr) * p.len;
    report.spkerr_ticks += (std::min(nr, nh) - correct) * p.len;
    report.speech_ticks += nr * p.len;
  }
  // Scored wall-clock time: everything from 0 to the last boundary that is
  // not inside a collar.
  if (!points.empty()) {
    int64_t lo = std::min<int64_t>(0, points.front());
    int64_t hi = points.back();
    int64_t excl = 0;
    for (const auto& iv : excluded) {
      int64_t a = std::max(iv.first, lo), b = std::min(iv.second, hi);
      if (b > a) excl += b - a;
    }
    report.scored_ticks = (hi - lo) - excl;
  }
  FillPercentages(&report);
  return report;
}

DerReport AggregateReports(const std::vector<DerReport>& reports) {
  DerReport total;
  if (!reports.empty()) total.resolution_s = reports.front().resolution_s;
  for (const auto& r : reports) {
    if (r.resolution_s != total.resolution_s) {
      throw Error("cannot pool reports scored at different resolutions");
    }
    total.fa_ticks += r.fa_ticks;
    total.miss_ticks += r.miss_ticks;
    total.spkerr_ticks += r.spkerr_ticks;
    total.speech_ticks += r.speech_ticks;
    total.scored_ticks += r.scored_ticks;
  }
  FillPercentages(&total);
  return total;
}

double DerFromComponents(double fa, double miss, double spkerr) {
  if (fa < 0 || miss < 0 || spkerr < 0) {
    throw Error("DER components must be non-negative");
  }
  return fa + miss + spkerr;
}

}  // namespace avsd
