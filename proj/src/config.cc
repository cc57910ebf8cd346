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

#include "avsd/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "avsd/common.h"

namespace avsd {

namespace {

namespace pt = boost::property_tree;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

size_t ToSize(const std::string& key, const std::string& v) {
  size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v +
                      "'");
  }
  return static_cast<size_t>(x);
}

double ToDouble(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> SplitList(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string Num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string Join(const T& items) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::string>) {
      out += x;
    } else {
      out += std::to_string(x);
    }
  }
  return out;
}

struct Binding {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

using BindingTable = std::vector<std::pair<std::string, Binding>>;

#define AVSD_SIZE(key, field)                                              \
  {key,                                                                    \
   {[](PipelineConfig& c, const std::string& v) { c.field = ToSize(key, v); }, \
    [](const PipelineConfig& c) { return std::to_string(c.field); }}}
#define AVSD_INT(key, field)                                             \
  {key,                                                                  \
   {[](PipelineConfig& c, const std::string& v) {                        \
      c.field = static_cast<int>(ToSize(key, v));                        \
    },                                                                   \
    [](const PipelineConfig& c) { return std::to_string(c.field); }}}
#define AVSD_DOUBLE(key, field)                                            \
  {key,                                                                    \
   {[](PipelineConfig& c, const std::string& v) { c.field = ToDouble(key, v); }, \
    [](const PipelineConfig& c) { return Num(c.field); }}}
#define AVSD_BOOL(key, field)                                              \
  {key,                                                                    \
   {[](PipelineConfig& c, const std::string& v) { c.field = ToBool(key, v); }, \
    [](const PipelineConfig& c) {                                          \
      return std::string(c.field ? "true" : "false");                      \
    }}}

// Order matters: kind and preset reset the encoder dimensions, so they come
// before the individual dimension keys.
const BindingTable& Bindings() {
  static const BindingTable table = {
      {"speaker_encoder.kind",
       {[](PipelineConfig& c, const std::string& v) {
          const auto kind = ParseEncoderKind(v);
          c.model.speaker = c.model.speaker.preset == "paper"
                                ? EncoderConfig::Paper(kind)
                                : EncoderConfig::Toy(kind);
        },
        [](const PipelineConfig& c) { return ToString(c.model.speaker.kind); }}},
      {"speaker_encoder.preset",
       {[](PipelineConfig& c, const std::string& v) {
          if (v == "toy") {
            c.model.speaker = EncoderConfig::Toy(c.model.speaker.kind);
          } else if (v == "paper") {
            c.model.speaker = EncoderConfig::Paper(c.model.speaker.kind);
          } else {
            throw ConfigError("speaker_encoder.preset: expected toy or paper, "
                              "got '" + v + "'");
          }
        },
        [](const PipelineConfig& c) { return c.model.speaker.preset; }}},
      {"speaker_encoder.channels",
       {[](PipelineConfig& c, const std::string& v) {
          c.model.speaker.channels.clear();
          for (const auto& x : SplitList(v)) {
            c.model.speaker.channels.push_back(
                ToSize("speaker_encoder.channels", x));
          }
        },
        [](const PipelineConfig& c) { return Join(c.model.speaker.channels); }}},
      AVSD_SIZE("speaker_encoder.se_channels", model.speaker.se_channels),
      AVSD_SIZE("speaker_encoder.embed_dim", model.speaker.embed_dim),
      AVSD_SIZE("speaker_encoder.n_mels", model.speaker.input_dim),

      AVSD_SIZE("lip_encoder.input_dim", model.lip.input_dim),
      AVSD_SIZE("lip_encoder.model_dim", model.lip.model_dim),
      AVSD_SIZE("lip_encoder.heads", model.lip.heads),
      AVSD_SIZE("lip_encoder.ffn_dim", model.lip.ffn_dim),
      AVSD_SIZE("lip_encoder.layers", model.lip.layers),
      AVSD_SIZE("lip_encoder.conv_kernel", model.lip.conv_kernel),
      AVSD_INT("lip_encoder.video_fps", model.lip.video_fps),
      AVSD_SIZE("lip_encoder.chunk_frames", model.lip.chunk_frames),

      {"decoder.kind",
       {[](PipelineConfig& c, const std::string& v) {
          c.model.decoder.kind = ParseDecoderKind(v);
        },
        [](const PipelineConfig& c) { return ToString(c.model.decoder.kind); }}},
      AVSD_SIZE("decoder.layers", model.decoder.layers),
      AVSD_SIZE("decoder.heads", model.decoder.heads),
      AVSD_SIZE("decoder.model_dim", model.decoder.model_dim),
      AVSD_SIZE("decoder.ffn_dim", model.decoder.ffn_dim),
      AVSD_SIZE("decoder.conv_kernel", model.decoder.conv_kernel),
      AVSD_SIZE("decoder.num_speakers", model.decoder.num_speakers),

      AVSD_DOUBLE("train.lr", train.adam.lr),
      AVSD_DOUBLE("train.beta1", train.adam.beta1),
      AVSD_DOUBLE("train.beta2", train.adam.beta2),
      AVSD_DOUBLE("train.eps", train.adam.eps),
      AVSD_SIZE("train.batch_size", train.batch_size),
      AVSD_SIZE("train.chunk_frames", train.chunk_frames),
      AVSD_SIZE("train.epochs", train.epochs),
      AVSD_SIZE("train.steps_per_epoch", train.steps_per_epoch),
      AVSD_SIZE("train.seed", train.seed),
      {"train.frozen_modules",
       {[](PipelineConfig& c, const std::string& v) {
          const auto items = SplitList(v);
          c.train.frozen_modules = {items.begin(), items.end()};
        },
        [](const PipelineConfig& c) { return Join(c.train.frozen_modules); }}},
      AVSD_BOOL("train.joint_speaker_encoder", train.joint_speaker_encoder),

      AVSD_DOUBLE("pretrain.extractor_lr", pretrain_extractor.adam.lr),
      AVSD_SIZE("pretrain.extractor_steps", pretrain_extractor.steps),
      AVSD_SIZE("pretrain.extractor_batch_size", pretrain_extractor.batch_size),
      AVSD_SIZE("pretrain.extractor_clip_frames", extractor_clip_frames),
      AVSD_DOUBLE("pretrain.logit_scale", pretrain_extractor.logit_scale),
      AVSD_DOUBLE("pretrain.lip_lr", pretrain_lip.adam.lr),
      AVSD_SIZE("pretrain.lip_steps", pretrain_lip.steps),
      AVSD_SIZE("pretrain.lip_batch_size", pretrain_lip.batch_size),
      {"pretrain.seed",
       {[](PipelineConfig& c, const std::string& v) {
          c.pretrain_extractor.seed = c.pretrain_lip.seed =
              ToSize("pretrain.seed", v);
        },
        [](const PipelineConfig& c) {
          return std::to_string(c.pretrain_extractor.seed);
        }}},

      AVSD_DOUBLE("enroll.activity_threshold", enroll.activity_threshold),
      AVSD_SIZE("enroll.min_frames", enroll.min_frames),
      AVSD_SIZE("enroll.fallback_frames", enroll.fallback_frames),

      AVSD_SIZE("decode.chunk_frames", decode.chunk_frames),
      AVSD_SIZE("decode.shift_frames", decode.shift_frames),
      AVSD_SIZE("decode.median_kernel", decode.median_kernel),
      AVSD_DOUBLE("decode.threshold", decode.threshold),
      AVSD_DOUBLE("decode.min_segment_s", decode.min_segment_s),
      AVSD_DOUBLE("decode.min_gap_s", decode.min_gap_s),

      AVSD_DOUBLE("sv.min_segment_s", sv.min_segment_s),
      AVSD_DOUBLE("sv.margin", sv.reassign_margin),
      AVSD_SIZE("sv.longest_k", sv.enroll_longest_k),

      AVSD_DOUBLE("score.collar_s", score.collar_s),
      {"score.mapping",
       {[](PipelineConfig& c, const std::string& v) {
          c.score.mapping = ParseSpeakerMapping(v);
        },
        [](const PipelineConfig& c) { return ToString(c.score.mapping); }}},

      AVSD_INT("synth.num_meetings", corpus.num_meetings),
      AVSD_DOUBLE("synth.train_fraction", corpus.train_fraction),
      AVSD_INT("synth.speaker_pool", corpus.speaker_pool),
      AVSD_SIZE("synth.seed", corpus.seed),
      AVSD_INT("synth.num_speakers", corpus.meeting.num_speakers),
      AVSD_DOUBLE("synth.duration_s", corpus.meeting.duration_s),
      AVSD_DOUBLE("synth.overlap_ratio", corpus.meeting.overlap_ratio),
      AVSD_DOUBLE("synth.snr_db", corpus.meeting.snr_db),
      AVSD_INT("synth.lip_dim", corpus.meeting.lip_dim),
      AVSD_DOUBLE("synth.lip_gain", corpus.meeting.lip_gain),
      AVSD_DOUBLE("synth.mean_turn_s", corpus.meeting.mean_turn_s),

      AVSD_INT("run.jobs", jobs),
  };
  return table;
}

#undef AVSD_SIZE
#undef AVSD_INT
#undef AVSD_DOUBLE
#undef AVSD_BOOL

const Binding* FindBinding(const std::string& key) {
  for (const auto& [k, b] : Bindings()) {
    if (k == key) return &b;
  }
  return nullptr;
}

}  // namespace

void PipelineConfig::Validate() const {
  model.Validate();
  train.Validate();
  pretrain_extractor.Validate();
  pretrain_lip.Validate();
  if (extractor_clip_frames == 0) {
    throw ConfigError("pretrain.extractor_clip_frames must be >= 1");
  }
  decode.Validate();
  sv.Validate();
  if (score.collar_s < 0) throw ConfigError("score.collar_s must be >= 0");
  corpus.meeting.Validate();
  if (corpus.num_meetings < 1) throw ConfigError("synth.num_meetings >= 1");
  if (corpus.speaker_pool < corpus.meeting.num_speakers) {
    throw ConfigError("synth.speaker_pool smaller than synth.num_speakers");
  }
  if (!(corpus.train_fraction >= 0 && corpus.train_fraction <= 1)) {
    throw ConfigError("synth.train_fraction must lie in [0, 1]");
  }
  if (static_cast<size_t>(corpus.meeting.lip_dim) != model.lip.input_dim) {
    throw ConfigError("synth.lip_dim must equal lip_encoder.input_dim");
  }
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
}

PipelineConfig DefaultPipelineConfig() {
  PipelineConfig c;
  c.model.speaker = EncoderConfig::Toy(EncoderKind::kResNetSE);
  c.pretrain_extractor.steps = 150;
  c.pretrain_extractor.batch_size = 8;
  c.pretrain_lip.steps = 150;
  c.pretrain_lip.batch_size = 4;
  c.pretrain_lip.adam.lr = 3e-3;
  return c;
}

void SetConfigValue(PipelineConfig* cfg, const std::string& key,
                    const std::string& value) {
  const Binding* b = FindBinding(key);
  if (!b) throw ConfigError("unknown config key '" + key + "'");
  b->set(*cfg, Trim(value));
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> out;
  for (const auto& [k, b] : Bindings()) out.push_back(k);
  return out;
}

PipelineConfig ParsePipelineConfig(const std::string& text,
                                   const PipelineConfig& base) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " +
                      e.message());
  }
  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' outside any section");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      if (!FindBinding(full)) {
        throw ConfigError("unknown config key '" + full + "'");
      }
      values[full] = node.data();
    }
  }
  PipelineConfig cfg = base;
  for (const auto& [key, b] : Bindings()) {
    auto it = values.find(key);
    if (it != values.end()) b.set(cfg, Trim(it->second));
  }
  return cfg;
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParsePipelineConfig(ss.str(), DefaultPipelineConfig());
}

std::string RenderPipelineConfig(const PipelineConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, b] : Bindings()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << b.get(cfg) << "\n";
  }
  return os.str();
}

}  // namespace avsd
