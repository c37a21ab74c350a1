// ctckit/pipeline.hpp

// Copyright 2026   ctckit authors

// See ../../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Experiment plumbing shared by the command-line tools: TSV manifests,
// the JSON experiment configuration, and the synthetic-corpus spec.

#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ctckit/alphabet.hpp"
#include "ctckit/decoder.hpp"
#include "ctckit/frontend.hpp"
#include "ctckit/net/train.hpp"
#include "ctckit/segctc.hpp"
#include "ctckit/synth.hpp"
#include "ctckit/wav.hpp"

namespace ctckit {

using Json = nlohmann::json;

struct ManifestRow {
  std::string id;
  std::string audio;  // resolved path
  std::string transcript;
  std::optional<double> duration;
};

/// Splits one line on tabs.
inline std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

/// `utt_id<TAB>audio<TAB>transcript[<TAB>duration]`; relative audio paths
/// are resolved against the manifest's directory.
inline std::vector<ManifestRow> LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path);
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<ManifestRow> rows;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = SplitTabs(line);
    if (f.size() < 3 || f.size() > 4)
      throw Error(path + ":" + std::to_string(lineno) + ": expected 3 or 4 tab-separated fields");
    ManifestRow r{f[0], f[1], NormalizeNfc(f[2]), std::nullopt};
    if (std::filesystem::path(r.audio).is_relative()) r.audio = (base / r.audio).string();
    if (f.size() == 4) r.duration = std::stod(f[3]);
    if (!ids.insert(r.id).second)
      throw Error(path + ":" + std::to_string(lineno) + ": duplicate utterance id " + r.id);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// `utt_id<TAB>text[<TAB>...]`, extra columns ignored.
inline std::map<std::string, std::string> LoadTextTsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = SplitTabs(line);
    if (!out.emplace(f[0], f.size() > 1 ? f[1] : "").second)
      throw Error(path + ":" + std::to_string(lineno) + ": duplicate utterance id " + f[0]);
  }
  return out;
}

struct AugmentConfig {
  std::vector<double> speed_factors;  // extra copies, e.g. {0.9, 1.1}
  double volume_db = 0;               // random gain in [-v, v] per copy; 0 disables
};

struct ExperimentConfig {
  std::string alphabet_path;
  std::uint64_t seed = 1;
  FeatureConfig features;
  net::ModelSpec model;
  net::TrainConfig train;
  AugmentConfig augment;
  double alpha = 0.8;
  double beta = 1.0;
  std::size_t beam_width = 100;
  std::string lm_path;

  Alphabet alphabet;  // loaded from alphabet_path

  /// Cross-field checks; throws before any compute.
  void Validate() const {
    features.Validate();
    model.Validate();
    if (model.vocab() != alphabet.size())
      throw Error("config: model output size " + std::to_string(model.vocab()) +
                  " does not match alphabet size " + std::to_string(alphabet.size()));
    train.Validate();
    if (beam_width < 1) throw Error("config: beam must be >= 1");
    for (double f : augment.speed_factors)
      if (!(f >= 0.8 && f <= 1.25)) throw Error("config: speed factor outside [0.8, 1.25]");
    if (augment.volume_db < 0 || augment.volume_db > 10)
      throw Error("config: volume_db must be in [0, 10]");
  }
};

namespace detail {

template <class T>
void Get(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void CheckKeys(const Json& j, const char* where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw Error(std::string("config: '") + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw Error(std::string("config: unknown key '") + k + "' in " + where);
  }
}

}  // namespace detail

/// The "features" section on its own; used by featurize, which needs no model.
inline FeatureConfig ParseFeatureConfig(const Json& f) {
  using detail::Get;
  FeatureConfig c;
  try {
    detail::CheckKeys(f, "features", {"sample_rate", "window_ms", "shift_ms", "n_mels", "kind",
                                      "normalization", "deltas", "delta_context"});
    Get(f, "sample_rate", c.sample_rate);
    Get(f, "window_ms", c.window_ms);
    Get(f, "shift_ms", c.shift_ms);
    Get(f, "n_mels", c.n_mels);
    Get(f, "deltas", c.add_deltas);
    Get(f, "delta_context", c.delta_context);
    std::string kind = "fbank", norm = "cmn";
    Get(f, "kind", kind);
    Get(f, "normalization", norm);
    if (kind == "fbank") c.kind = FeatureKind::kFbank;
    else if (kind == "spectrogram") c.kind = FeatureKind::kSpectrogram;
    else throw Error("config: unknown feature kind '" + kind + "'");
    if (norm == "none") c.normalization = Normalization::kNone;
    else if (norm == "cmn") c.normalization = Normalization::kCmn;
    else if (norm == "cmvn") c.normalization = Normalization::kCmvn;
    else throw Error("config: unknown normalization '" + norm + "'");
  } catch (const Json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.Validate();
  return c;
}

/// Parses the experiment JSON. Relative paths resolve against `base_dir`.
inline ExperimentConfig ParseExperimentConfig(const Json& j, const std::filesystem::path& base_dir) {
  using detail::Get;
  ExperimentConfig c;
  try {
    detail::CheckKeys(j, "config", {"alphabet", "seed", "features", "model", "train", "segctc",
                                    "decoder", "augment"});
    if (!j.contains("alphabet")) throw Error("config: 'alphabet' is required");
    if (!j.contains("model")) throw Error("config: 'model' is required");
    c.alphabet_path = j.at("alphabet").get<std::string>();
    if (std::filesystem::path(c.alphabet_path).is_relative())
      c.alphabet_path = (base_dir / c.alphabet_path).string();
    Get(j, "seed", c.seed);
    c.train.seed = c.seed;

    if (j.contains("features")) c.features = ParseFeatureConfig(j.at("features"));

    c.model = net::ModelSpec::Parse(j.at("model").get<std::vector<std::string>>());

    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::CheckKeys(t, "train", {"optimizer", "lr", "beta1", "beta2", "eps", "momentum",
                                     "lr_decay", "batch_size", "epochs", "sortagrad", "loss",
                                     "grad_clip"});
      std::string opt = "adam", loss = "ctc";
      Get(t, "optimizer", opt);
      if (opt == "adam") c.train.optimizer.kind = net::OptimizerKind::kAdam;
      else if (opt == "sgd") c.train.optimizer.kind = net::OptimizerKind::kSgdMomentum;
      else throw Error("config: unknown optimizer '" + opt + "'");
      Get(t, "lr", c.train.optimizer.lr);
      Get(t, "beta1", c.train.optimizer.beta1);
      Get(t, "beta2", c.train.optimizer.beta2);
      Get(t, "eps", c.train.optimizer.eps);
      Get(t, "momentum", c.train.optimizer.momentum);
      Get(t, "lr_decay", c.train.lr_decay);
      Get(t, "batch_size", c.train.batch_size);
      Get(t, "epochs", c.train.epochs);
      Get(t, "sortagrad", c.train.sortagrad);
      Get(t, "grad_clip", c.train.grad_clip);
      Get(t, "loss", loss);
      if (loss == "ctc") c.train.loss = net::LossKind::kCtc;
      else if (loss == "segctc") c.train.loss = net::LossKind::kSegCtc;
      else throw Error("config: unknown loss '" + loss + "'");
    }
    if (j.contains("segctc")) {
      const auto& s = j.at("segctc");
      detail::CheckKeys(s, "segctc", {"enabled", "min_word_len", "warmup_epochs"});
      Get(s, "enabled", c.train.seg.enabled);
      Get(s, "min_word_len", c.train.seg.min_word_len);
      Get(s, "warmup_epochs", c.train.seg.warmup_epochs);
    }
    if (j.contains("decoder")) {
      const auto& d = j.at("decoder");
      detail::CheckKeys(d, "decoder", {"alpha", "beta", "beam", "lm"});
      Get(d, "alpha", c.alpha);
      Get(d, "beta", c.beta);
      Get(d, "beam", c.beam_width);
      Get(d, "lm", c.lm_path);
      if (!c.lm_path.empty() && std::filesystem::path(c.lm_path).is_relative())
        c.lm_path = (base_dir / c.lm_path).string();
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      detail::CheckKeys(a, "augment", {"speed", "volume_db"});
      Get(a, "speed", c.augment.speed_factors);
      Get(a, "volume_db", c.augment.volume_db);
    }
  } catch (const Json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.alphabet = Alphabet::Load(c.alphabet_path);
  c.train.space_id = c.alphabet.space_index().value_or(-1);
  c.Validate();
  return c;
}

inline ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return ParseExperimentConfig(j, std::filesystem::path(path).parent_path());
}

inline SynthSpec ParseSynthSpec(const Json& j) {
  using detail::Get;
  SynthSpec s;
  try {
    detail::CheckKeys(j, "synth spec",
                      {"sample_rate", "symbols", "utterances", "words_per_utterance",
                       "vocabulary", "vocab_size", "word_length", "tone_ms", "gap_ms", "lead_ms",
                       "amplitude", "noise_level", "label_noise", "min_separation_hz", "seed"});
    if (!j.contains("symbols") || !j.at("symbols").is_array())
      throw Error("synth spec: 'symbols' must be a list of [symbol, hz] pairs");
    for (const auto& e : j.at("symbols"))
      s.tones.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
    Get(j, "sample_rate", s.sample_rate);
    Get(j, "utterances", s.utterances);
    if (j.contains("words_per_utterance")) {
      auto r = j.at("words_per_utterance").get<std::vector<std::size_t>>();
      if (r.size() != 2) throw Error("synth spec: words_per_utterance must be [min, max]");
      s.min_words = r[0];
      s.max_words = r[1];
    }
    Get(j, "vocabulary", s.vocabulary);
    Get(j, "vocab_size", s.vocab_size);
    if (j.contains("word_length")) {
      auto r = j.at("word_length").get<std::vector<std::size_t>>();
      if (r.size() != 2) throw Error("synth spec: word_length must be [min, max]");
      s.min_word_len = r[0];
      s.max_word_len = r[1];
    }
    if (j.contains("tone_ms")) {
      auto r = j.at("tone_ms").get<std::vector<double>>();
      if (r.size() != 2) throw Error("synth spec: tone_ms must be [min, max]");
      s.min_tone_ms = r[0];
      s.max_tone_ms = r[1];
    }
    Get(j, "gap_ms", s.gap_ms);
    Get(j, "lead_ms", s.lead_ms);
    Get(j, "amplitude", s.amplitude);
    Get(j, "noise_level", s.noise_level);
    Get(j, "label_noise", s.label_noise);
    Get(j, "min_separation_hz", s.min_separation_hz);
    Get(j, "seed", s.seed);
  } catch (const Json::exception& e) {
    throw Error(std::string("synth spec: ") + e.what());
  }
  s.Validate();
  return s;
}

/// Reads a WAV and computes features; the sample rate must match.
inline FeatureMatrix FeaturizeWav(const std::string& path, const FeatureConfig& cfg) {
  Wave w = ReadWav(path);
  if (w.sample_rate != cfg.sample_rate)
    throw Error(path + ": sample rate " + std::to_string(w.sample_rate) +
                " does not match the configured " + std::to_string(cfg.sample_rate));
  return ComputeFeatures(w.samples, cfg);
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any call is rethrown after all workers stop.
template <class F>
void ParallelFor(std::size_t n, int threads, F&& body) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1, threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ctckit
