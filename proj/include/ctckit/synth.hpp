// ctckit/synth.hpp

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

// Synthetic tone corpus: every grapheme is rendered as a fixed-frequency
// tone burst, graphemes are separated by short silences, and transcripts are
// drawn from a random word vocabulary. Stands in for real speech when
// exercising the training and decoding pipeline.

#pragma once

#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ctckit/alphabet.hpp"
#include "ctckit/wav.hpp"

namespace ctckit {

struct SynthSpec {
  int sample_rate = 8000;
  std::vector<std::pair<std::string, double>> tones;  // symbol -> Hz, "<space>" allowed
  std::size_t utterances = 50;
  std::size_t min_words = 2, max_words = 4;
  std::vector<std::string> vocabulary;  // generated when empty
  std::size_t vocab_size = 12;
  std::size_t min_word_len = 3, max_word_len = 6;
  double min_tone_ms = 60, max_tone_ms = 90;
  double gap_ms = 20;
  double lead_ms = 50;
  double amplitude = 8000;
  double noise_level = 0;        // white-noise std relative to amplitude
  double label_noise = 0;        // per-letter substitution rate in the written transcript
  double min_separation_hz = 100;
  std::uint64_t seed = 7;

  void Validate() const {
    if (tones.empty()) throw Error("synth: empty symbol inventory");
    if (sample_rate <= 0) throw Error("synth: sample_rate must be positive");
    std::set<std::string> seen;
    for (const auto& [s, f] : tones) {
      if (!seen.insert(s).second) throw Error("synth: duplicate symbol '" + s + "'");
      if (!(f > 0 && f < sample_rate / 2.0)) throw Error("synth: tone for '" + s + "' out of band");
    }
    for (std::size_t i = 0; i < tones.size(); ++i)
      for (std::size_t j = i + 1; j < tones.size(); ++j)
        if (std::abs(tones[i].second - tones[j].second) < min_separation_hz)
          throw Error("synth: tones for '" + tones[i].first + "' and '" + tones[j].first +
                      "' overlap");
    if (min_words < 1 || max_words < min_words) throw Error("synth: bad words-per-utterance range");
    if (min_word_len < 1 || max_word_len < min_word_len) throw Error("synth: bad word length range");
    if (!(min_tone_ms > 0) || max_tone_ms < min_tone_ms) throw Error("synth: bad tone duration range");
    if (label_noise < 0 || label_noise > 1) throw Error("synth: label_noise must be in [0, 1]");
  }

  /// `<blank>` followed by the tone symbols in order.
  Alphabet MakeAlphabet() const {
    std::vector<std::string> syms{std::string(kBlankMarker)};
    for (const auto& [s, f] : tones) syms.push_back(s);
    return Alphabet::Build(syms);
  }
};

struct SynthUtterance {
  std::string id;
  std::string transcript;        // what the audio says
  std::string noisy_transcript;  // transcript after label noise
  Wave wave;
};

inline std::vector<SynthUtterance> Synthesize(const SynthSpec& spec) {
  spec.Validate();
  const Alphabet alphabet = spec.MakeAlphabet();
  std::mt19937_64 rng(spec.seed);
  const int space = alphabet.space_index().value_or(-1);

  std::vector<int> letters;
  for (std::size_t id = 1; id < alphabet.size(); ++id)
    if (static_cast<int>(id) != space) letters.push_back(static_cast<int>(id));
  if (letters.empty()) throw Error("synth: no letters besides the space");

  std::map<int, double> freq;
  for (const auto& [s, f] : spec.tones)
    freq[*alphabet.Find(s == kSpaceMarker ? std::string(" ") : NormalizeNfc(s))] = f;

  std::vector<std::string> vocab = spec.vocabulary;
  if (vocab.empty()) {
    std::set<std::string> uniq;
    std::uniform_int_distribution<std::size_t> len(spec.min_word_len, spec.max_word_len);
    std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
    for (int attempt = 0; uniq.size() < spec.vocab_size && attempt < 100000; ++attempt) {
      std::string w;
      for (std::size_t n = len(rng); n > 0; --n) w += alphabet.symbol(letters[pick(rng)]);
      if (uniq.insert(w).second) vocab.push_back(w);
    }
  }
  if (vocab.empty()) throw Error("synth: empty vocabulary");
  for (const auto& w : vocab) alphabet.Encode(w);

  const double sr = spec.sample_rate;
  std::uniform_int_distribution<std::size_t> nwords(spec.min_words, spec.max_words);
  std::uniform_int_distribution<std::size_t> pickw(0, vocab.size() - 1);
  std::uniform_real_distribution<double> dur(spec.min_tone_ms, spec.max_tone_ms);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto silence = [&](std::vector<float>& s, double ms) {
    s.insert(s.end(), static_cast<std::size_t>(std::lround(ms * sr / 1000.0)), 0.0f);
  };

  std::vector<SynthUtterance> out;
  for (std::size_t u = 0; u < spec.utterances; ++u) {
    SynthUtterance utt;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "utt%05zu", u);
    utt.id = idbuf;
    std::size_t nw = nwords(rng);
    for (std::size_t w = 0; w < nw; ++w) {
      if (w) utt.transcript += ' ';
      utt.transcript += vocab[pickw(rng)];
    }
    if (space < 0) {
      // no space symbol: words run together
      std::string joined;
      for (char c : utt.transcript)
        if (c != ' ') joined += c;
      utt.transcript = joined;
    }
    const auto ids = alphabet.Encode(utt.transcript);
    auto& s = utt.wave.samples;
    utt.wave.sample_rate = spec.sample_rate;
    silence(s, spec.lead_ms);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k) silence(s, spec.gap_ms);
      const std::size_t n = static_cast<std::size_t>(std::lround(dur(rng) * sr / 1000.0));
      const std::size_t ramp = std::min<std::size_t>(n / 4, static_cast<std::size_t>(0.005 * sr));
      const double f = freq.at(ids[k]), ph = phase(rng);
      for (std::size_t i = 0; i < n; ++i) {
        double env = 1.0;
        if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * double(i) / double(ramp));
        else if (i + ramp >= n) env = 0.5 - 0.5 * std::cos(std::numbers::pi * double(n - 1 - i) / double(ramp));
        s.push_back(static_cast<float>(spec.amplitude * env *
                                       std::sin(2.0 * std::numbers::pi * f * double(i) / sr + ph)));
      }
    }
    silence(s, spec.lead_ms);
    if (spec.noise_level > 0)
      for (float& x : s) x += static_cast<float>(spec.noise_level * spec.amplitude * noise(rng));

    std::vector<int> noisy = ids;
    if (spec.label_noise > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
      for (int& id : noisy) {
        if (id == space || unit(rng) >= spec.label_noise) continue;
        if (letters.size() < 2) continue;
        int repl;
        do repl = letters[pick(rng)];
        while (repl == id);
        id = repl;
      }
    }
    utt.noisy_transcript = alphabet.Decode(noisy);
    out.push_back(std::move(utt));
  }
  return out;
}

/// Default inventory used by the demos and the acceptance suite: six
/// letters plus the space, spread over 300-3300 Hz.
inline SynthSpec DefaultToneSpec() {
  SynthSpec s;
  s.tones = {{"a", 450}, {"b", 900}, {"d", 1350}, {"e", 1800},
             {"k", 2250}, {"r", 2700}, {"<space>", 3200}};
  return s;
}

}  // namespace ctckit
