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

#include "avsd/secondsv.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include <glog/logging.h>

#include "avsd/common.h"
#include "avsd/rng.h"

namespace avsd {

namespace {

// Boundaries are compared on a microsecond lattice.
int64_t Tick(double t) { return std::llround(t * 1e6); }
double FromTick(int64_t t) { return static_cast<double>(t) / 1e6; }

}  // namespace

void SvConfig::Validate() const {
  if (!(min_segment_s > 0.0)) throw ConfigError("sv min_segment_s must be > 0");
  if (!(reassign_margin >= 0.0)) throw ConfigError("sv margin must be >= 0");
  if (enroll_longest_k == 0) throw ConfigError("sv enrollment k must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

std::vector<SpeakerInterval> SingleSpeakerSegments(
    const DiarizationAnnotation& ann, double min_segment_s) {
  // Sweep over start/end events, tracking the active speaker multiset.
  std::map<int64_t, std::vector<std::pair<int, std::string>>> events;
  for (const auto& e : ann.entries) {
    events[Tick(e.onset_s)].push_back({+1, e.speaker});
    events[Tick(e.end_s())].push_back({-1, e.speaker});
  }
  std::map<std::string, int> active;
  std::vector<SpeakerInterval> out;
  std::string current;
  int64_t start = 0;
  auto close = [&](int64_t at) {
    if (!current.empty() && at > start) {
      out.push_back({current, FromTick(start), FromTick(at)});
    }
    current.clear();
  };
  for (const auto& [t, changes] : events) {
    for (const auto& [delta, spk] : changes) {
      if ((active[spk] += delta) == 0) active.erase(spk);
    }
    const std::string sole =
        active.size() == 1 ? active.begin()->first : std::string();
    if (sole == current) continue;
    close(t);
    current = sole;
    start = t;
  }
  std::vector<SpeakerInterval> kept;
  for (auto& s : out) {
    if (s.duration() + 1e-9 >= min_segment_s) kept.push_back(std::move(s));
  }
  return kept;
}

double CosineSimilarity(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("embedding sizes differ");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

DiarizationAnnotation Relabel(const DiarizationAnnotation& ann,
                              const std::string& from, const std::string& to,
                              double begin_s, double end_s) {
  DiarizationAnnotation out;
  out.session_id = ann.session_id;
  const int64_t b = Tick(begin_s), e = Tick(end_s);
  for (const auto& seg : ann.entries) {
    const int64_t sb = Tick(seg.onset_s), se = Tick(seg.end_s());
    if (seg.speaker != from || se <= b || sb >= e) {
      out.entries.push_back(seg);
      continue;
    }
    if (sb < b) {
      out.entries.push_back({seg.speaker, seg.onset_s, FromTick(b - sb)});
    }
    if (se > e) {
      out.entries.push_back({seg.speaker, end_s, FromTick(se - e)});
    }
  }
  out.entries.push_back({to, begin_s, FromTick(e - b)});
  out.Normalize();
  return out;
}

SvResult CorrectSpeakers(const DiarizationAnnotation& ann,
                         const AudioSignal& audio, const EmbeddingFn& embed,
                         const SvConfig& cfg) {
  cfg.Validate();
  SvResult result;
  result.annotation = ann;
  const auto segments = SingleSpeakerSegments(ann, cfg.min_segment_s);
  result.segments_checked = segments.size();
  if (segments.empty()) return result;

  std::vector<std::vector<double>> emb(segments.size());
  auto work = [&](size_t worker) {
    for (size_t i = worker; i < segments.size();
         i += static_cast<size_t>(cfg.jobs)) {
      emb[i] = embed(audio.Crop(segments[i].begin_s, segments[i].end_s));
    }
  };
  if (cfg.jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < cfg.jobs; ++j) pool.emplace_back(work, j);
    for (auto& t : pool) t.join();
  }

  // Centroids from each speaker's longest segments; ties broken by onset.
  std::map<std::string, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < segments.size(); ++i) {
    by_speaker[segments[i].speaker].push_back(i);
  }
  std::map<std::string, std::vector<double>> centroid;
  for (auto& [spk, idx] : by_speaker) {
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return segments[a].duration() > segments[b].duration() + 1e-9;
    });
    std::vector<double> c(emb[idx[0]].size(), 0.0);
    for (size_t j = 0; j < std::min(cfg.enroll_longest_k, idx.size()); ++j) {
      const auto& e = emb[idx[j]];
      double n = 0;
      for (double v : e) n += v * v;
      n = n > 0 ? std::sqrt(n) : 1.0;
      for (size_t d = 0; d < c.size(); ++d) c[d] += e[d] / n;
    }
    double n = 0;
    for (double v : c) n += v * v;
    if (n > 0) {
      n = std::sqrt(n);
      for (double& v : c) v /= n;
    }
    centroid[spk] = std::move(c);
  }
  for (const auto& spk : ann.Speakers()) {
    if (!centroid.count(spk)) {
      LOG(WARNING) << ann.session_id << ": speaker " << spk
                   << " has no single-speaker segment; exempt from relabeling";
      result.exempt_speakers.push_back(spk);
    }
  }

  // Decisions use the input labels; relabels are applied afterwards.
  std::vector<std::pair<size_t, std::string>> moves;
  for (size_t i = 0; i < segments.size(); ++i) {
    const std::string& own = segments[i].speaker;
    const double own_cos = CosineSimilarity(emb[i], centroid.at(own));
    std::string best;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (const auto& [spk, c] : centroid) {
      if (spk == own) continue;
      const double cs = CosineSimilarity(emb[i], c);
      if (cs > best_cos) {
        best_cos = cs;
        best = spk;
      }
    }
    if (!best.empty() && best_cos - own_cos > cfg.reassign_margin) {
      moves.push_back({i, best});
    }
  }
  for (const auto& [i, to] : moves) {
    result.annotation = Relabel(result.annotation, segments[i].speaker, to,
                                segments[i].begin_s, segments[i].end_s);
  }
  result.segments_relabeled = moves.size();
  return result;
}

namespace {

bool ActiveNear(const DiarizationAnnotation& ann, const std::string& spk,
                double begin_s, double end_s) {
  for (const auto& e : ann.entries) {
    if (e.speaker == spk && e.onset_s < end_s && e.end_s() > begin_s) {
      return true;
    }
  }
  return false;
}

}  // namespace

Corruption CorruptSingleSpeakerLabels(const DiarizationAnnotation& ann,
                                      double fraction, uint64_t seed,
                                      double min_segment_s, double guard_s) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("corruption fraction must be in [0, 1]");
  }
  const auto segments = SingleSpeakerSegments(ann, min_segment_s);
  const auto speakers = ann.Speakers();
  Rng rng(seed);
  // Candidate replacements per segment, then a seeded choice of segments.
  std::vector<std::vector<std::string>> options(segments.size());
  std::vector<size_t> eligible;
  for (size_t i = 0; i < segments.size(); ++i) {
    for (const auto& spk : speakers) {
      if (spk == segments[i].speaker) continue;
      if (!ActiveNear(ann, spk, segments[i].begin_s - guard_s,
                      segments[i].end_s + guard_s)) {
        options[i].push_back(spk);
      }
    }
    if (!options[i].empty()) eligible.push_back(i);
  }
  size_t want = static_cast<size_t>(std::llround(fraction * segments.size()));
  if (want == 0 && fraction > 0.0 && !eligible.empty()) want = 1;
  want = std::min(want, eligible.size());
  for (size_t i = eligible.size(); i > 1; --i) {
    std::swap(eligible[i - 1], eligible[rng.Below(i)]);
  }
  std::set<size_t> chosen(eligible.begin(), eligible.begin() + want);

  Corruption out;
  out.annotation = ann;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (!chosen.count(i)) {
      out.clean.push_back(segments[i]);
      continue;
    }
    const auto& opts = options[i];
    const std::string& to = opts[rng.Below(opts.size())];
    out.corrupted.push_back({segments[i], to});
    out.annotation = Relabel(out.annotation, segments[i].speaker, to,
                             segments[i].begin_s, segments[i].end_s);
  }
  return out;
}

std::string SoleSpeaker(const DiarizationAnnotation& ann, double begin_s,
                        double end_s) {
  std::string who;
  const int64_t b = Tick(begin_s), e = Tick(end_s);
  for (const auto& seg : ann.entries) {
    const int64_t sb = Tick(seg.onset_s), se = Tick(seg.end_s());
    if (se <= b || sb >= e) continue;
    if (sb > b || se < e || (!who.empty() && who != seg.speaker)) return "";
    who = seg.speaker;
  }
  return who;
}

RestorationStats EvaluateRestoration(const Corruption& corruption,
                                     const DiarizationAnnotation& corrected) {
  RestorationStats s;
  for (const auto& c : corruption.corrupted) {
    ++s.corrupted;
    if (SoleSpeaker(corrected, c.interval.begin_s, c.interval.end_s) ==
        c.interval.speaker) {
      ++s.restored;
    }
  }
  for (const auto& c : corruption.clean) {
    ++s.clean;
    if (SoleSpeaker(corrected, c.begin_s, c.end_s) != c.speaker) ++s.disturbed;
  }
  return s;
}

}  // namespace avsd
