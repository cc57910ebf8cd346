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

#include "avsd/rttm.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "avsd/common.h"

namespace avsd {

namespace {

constexpr double kTimeEps = 1e-9;

bool SegmentLess(const Segment& a, const Segment& b) {
  if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
  if (a.speaker != b.speaker) return a.speaker < b.speaker;
  return a.duration_s < b.duration_s;
}

double ParseNumber(const std::string& field, const char* what, int line) {
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size() ||
      !std::isfinite(v)) {
    throw ParseError(std::string("bad ") + what + " \"" + field + "\"", line);
  }
  return v;
}

}  // namespace

void DiarizationAnnotation::Normalize() {
  std::map<std::string, std::vector<Segment>> by_speaker;
  for (auto& e : entries) by_speaker[e.speaker].push_back(e);
  std::vector<Segment> merged;
  for (auto& [spk, segs] : by_speaker) {
    std::sort(segs.begin(), segs.end(), SegmentLess);
    Segment cur = segs.front();
    for (size_t i = 1; i < segs.size(); ++i) {
      if (segs[i].onset_s <= cur.end_s() + kTimeEps) {
        double end = std::max(cur.end_s(), segs[i].end_s());
        cur.duration_s = end - cur.onset_s;
      } else {
        merged.push_back(cur);
        cur = segs[i];
      }
    }
    merged.push_back(cur);
  }
  std::sort(merged.begin(), merged.end(), SegmentLess);
  entries = std::move(merged);
}

void DiarizationAnnotation::Validate() const {
  for (const auto& e : entries) {
    if (!(e.duration_s > 0) || !(e.onset_s >= 0) ||
        !std::isfinite(e.end_s())) {
      throw Error("session " + session_id + ": invalid segment for " +
                  e.speaker + " at " + std::to_string(e.onset_s));
    }
  }
}

std::vector<std::string> DiarizationAnnotation::Speakers() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.speaker);
  return {s.begin(), s.end()};
}

double DiarizationAnnotation::TotalDuration() const {
  double d = 0.0;
  for (const auto& e : entries) d += e.duration_s;
  return d;
}

AnnotationMap ParseRttm(std::string_view text, bool lenient) {
  AnnotationMap out;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string tok; ls >> tok;) f.push_back(tok);
    if (f.empty() || f[0].rfind(";;", 0) == 0) continue;
    if (f[0] != "SPEAKER") {
      if (lenient) continue;
      throw ParseError("unsupported record type \"" + f[0] + "\"", lineno);
    }
    if (f.size() < 9 || f.size() > 10) {
      throw ParseError("expected 9 or 10 fields, got " +
                           std::to_string(f.size()),
                       lineno);
    }
    Segment seg;
    seg.onset_s = ParseNumber(f[3], "onset", lineno);
    seg.duration_s = ParseNumber(f[4], "duration", lineno);
    seg.speaker = f[7];
    if (seg.onset_s < 0) throw ParseError("negative onset", lineno);
    if (!(seg.duration_s > 0)) throw ParseError("non-positive duration", lineno);
    auto& ann = out[f[1]];
    ann.session_id = f[1];
    ann.entries.push_back(std::move(seg));
  }
  for (auto& [_, ann] : out) ann.Normalize();
  return out;
}

AnnotationMap ReadRttmFile(const std::string& path, bool lenient) {
  std::ifstream is(path);
  if (!is) throw MissingDataError("cannot open rttm: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return ParseRttm(ss.str(), lenient);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

std::string FormatCentiseconds(double seconds) {
  long long cs = std::llrint(seconds * 100.0);
  bool neg = cs < 0;
  if (neg) cs = -cs;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", neg ? "-" : "", cs / 100,
                cs % 100);
  return buf;
}

std::string WriteRttm(const DiarizationAnnotation& annotation) {
  std::vector<Segment> sorted = annotation.entries;
  std::sort(sorted.begin(), sorted.end(), SegmentLess);
  std::string out;
  for (const auto& e : sorted) {
    out += "SPEAKER " + annotation.session_id + " 1 " +
           FormatCentiseconds(e.onset_s) + " " +
           FormatCentiseconds(e.duration_s) + " <NA> <NA> " + e.speaker +
           " <NA> <NA>\n";
  }
  return out;
}

std::string WriteRttm(const AnnotationMap& annotations) {
  std::string out;
  for (const auto& [_, ann] : annotations) out += WriteRttm(ann);
  return out;
}

void WriteRttmFile(const std::string& path, const AnnotationMap& annotations) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os << WriteRttm(annotations);
  if (!os) throw Error("write failed: " + path);
}

LabelMatrix AnnotationToLabels(const DiarizationAnnotation& ann,
                               const std::vector<std::string>& speakers,
                               double frame_hop_s, size_t num_frames) {
  if (!(frame_hop_s > 0)) throw ConfigError("frame hop must be positive");
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < speakers.size(); ++i) index[speakers[i]] = i;
  Tensor covered = Tensor::Matrix(speakers.size(), num_frames);
  for (const auto& e : ann.entries) {
    auto it = index.find(e.speaker);
    if (it == index.end()) {
      throw Error("session " + ann.session_id + ": unknown speaker \"" +
                  e.speaker + "\"");
    }
    double on = e.onset_s, off = e.end_s();
    long first = static_cast<long>(std::floor(on / frame_hop_s));
    long last = static_cast<long>(std::ceil(off / frame_hop_s));
    first = std::max(first, 0L);
    last = std::min(last, static_cast<long>(num_frames));
    for (long t = first; t < last; ++t) {
      double a = std::max(on, t * frame_hop_s);
      double b = std::min(off, (t + 1) * frame_hop_s);
      if (b > a) covered.at(it->second, static_cast<size_t>(t)) += b - a;
    }
  }
  LabelMatrix out;
  out.frame_hop_s = frame_hop_s;
  out.speakers = speakers;
  out.labels = Tensor::Matrix(speakers.size(), num_frames);
  for (size_t i = 0; i < covered.size(); ++i) {
    out.labels[i] = covered[i] >= frame_hop_s / 2 - kTimeEps ? 1.0 : 0.0;
  }
  return out;
}

DiarizationAnnotation LabelsToAnnotation(const LabelMatrix& labels,
                                         const std::string& session_id) {
  DiarizationAnnotation ann;
  ann.session_id = session_id;
  size_t T = labels.num_frames();
  // Frame index -> seconds. Dividing by an integral frame rate keeps grid
  // times identical to the values a parser produces for "k.kk" text.
  double rate = 1.0 / labels.frame_hop_s;
  bool integral = std::abs(rate - std::round(rate)) < 1e-9;
  auto to_seconds = [&](size_t frames) {
    return integral ? static_cast<double>(frames) / std::round(rate)
                    : static_cast<double>(frames) * labels.frame_hop_s;
  };
  for (size_t s = 0; s < labels.num_speakers(); ++s) {
    size_t t = 0;
    while (t < T) {
      if (labels.labels.at(s, t) < 0.5) {
        ++t;
        continue;
      }
      size_t start = t;
      while (t < T && labels.labels.at(s, t) >= 0.5) ++t;
      ann.entries.push_back(
          {labels.speakers[s], to_seconds(start), to_seconds(t - start)});
    }
  }
  ann.Normalize();
  return ann;
}

}  // namespace avsd
