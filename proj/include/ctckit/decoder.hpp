// ctckit/decoder.hpp

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

// CTC prefix beam search with a character n-gram LM, ranking label
// sequences c by
//
//   Q(c) = log P(c | x) + alpha * ln P_lm(c) + beta * wordcount(c)
//
// where log P(c | x) is the prefix posterior (sum over alignments).

#pragma once

#include <algorithm>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctckit/alphabet.hpp"
#include "ctckit/ctc.hpp"
#include "ctckit/lm.hpp"

namespace ctckit {

inline constexpr double kLn10 = std::numbers::ln10;

struct DecoderConfig {
  double alpha = 0.8;
  double beta = 1.0;
  std::size_t beam_width = 100;
  std::size_t n_best = 1;
  std::shared_ptr<const NGramLM> lm;

  void Validate() const {
    if (beam_width < 1) throw Error("DecoderConfig: beam_width must be >= 1");
    if (!std::isfinite(alpha) || !std::isfinite(beta))
      throw Error("DecoderConfig: alpha and beta must be finite");
    if (alpha != 0 && !lm) throw Error("DecoderConfig: alpha != 0 requires a language model");
  }
};

struct Hypothesis {
  std::vector<int> prefix;  // no blanks
  double p_blank = kLogZero;
  double p_nonblank = kLogZero;
  double lm_score = 0;      // natural log, unweighted
  int word_count = 0;       // completed words

  double acoustic() const { return LogAdd(p_blank, p_nonblank); }
};

struct DecodeResult {
  std::vector<int> labels;
  std::string text;
  double q = 0;
  double acoustic = 0;
  double lm_score = 0;  // natural log, unweighted
  int words = 0;
};

/// Number of nonempty space-delimited words.
inline int WordCount(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char ch : text) {
    if (ch == ' ') {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

/// LM tokens for a text: one per grapheme, the space spelled `<space>`.
inline std::vector<std::string> LmTokens(std::string_view text) {
  auto toks = SplitScalars(NormalizeNfc(text));
  for (auto& t : toks)
    if (t == " ") t = std::string(kSpaceMarker);
  return toks;
}

/// Q for a finished transcript; `lm` may be null (no LM term).
inline double RescoreQ(std::string_view text, double acoustic, const NGramLM* lm,
                       double alpha, double beta) {
  double lm_ln = lm ? kLn10 * lm->SentenceScore(LmTokens(text)) : 0.0;
  return acoustic + alpha * lm_ln + beta * WordCount(text);
}

/// Frame-synchronous prefix beam search. Step() consumes one lattice row;
/// Finish() adds the end-of-sentence terms and ranks the beam.
class PrefixBeamSearch {
 public:
  PrefixBeamSearch(const Alphabet& alphabet, DecoderConfig cfg)
      : alphabet_(alphabet), cfg_(std::move(cfg)) {
    cfg_.Validate();
    space_ = alphabet_.space_index().value_or(-1);
    if (cfg_.lm) {
      for (std::size_t id = 1; id < alphabet_.size(); ++id)
        if (!cfg_.lm->Contains(alphabet_.Token(id)))
          throw Error("alphabet symbol '" + alphabet_.Token(id) +
                      "' is missing from the language model vocabulary");
    }
    Hypothesis root;
    root.p_blank = 0.0;
    beam_.push_back(std::move(root));
  }

  void Step(std::span<const double> row) {
    if (row.size() != alphabet_.size())
      throw Error("lattice width does not match the alphabet");
    const int blank = alphabet_.blank_index();
    next_.clear();
    index_.clear();
    for (const Hypothesis& h : beam_) {
      const double total = h.acoustic();
      {
        auto& s = Slot(h.prefix, h);
        s.p_blank = LogAdd(s.p_blank, total + row[blank]);
      }
      const int last = h.prefix.empty() ? -1 : h.prefix.back();
      if (last >= 0) {
        auto& s = Slot(h.prefix, h);
        s.p_nonblank = LogAdd(s.p_nonblank, h.p_nonblank + row[last]);
      }
      for (int c = 0; c < static_cast<int>(row.size()); ++c) {
        if (c == blank) continue;
        std::vector<int> ext = h.prefix;
        ext.push_back(c);
        auto& s = Extended(std::move(ext), h, c);
        const double from = c == last ? h.p_blank : total;
        s.p_nonblank = LogAdd(s.p_nonblank, from + row[c]);
      }
    }
    Prune();
  }

  std::vector<DecodeResult> Finish() const {
    std::vector<DecodeResult> out;
    out.reserve(beam_.size());
    for (const auto& h : beam_) {
      DecodeResult r;
      r.labels = h.prefix;
      r.text = alphabet_.Decode(h.prefix);
      r.acoustic = h.acoustic();
      r.lm_score = h.lm_score;
      if (cfg_.lm) r.lm_score += LmDelta(h.prefix, -1);
      r.words = h.word_count + (!h.prefix.empty() && h.prefix.back() != space_ ? 1 : 0);
      r.q = r.acoustic + (cfg_.lm ? cfg_.alpha * r.lm_score : 0.0) + cfg_.beta * r.words;
      out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const DecodeResult& a, const DecodeResult& b) {
      if (a.q != b.q) return a.q > b.q;
      return a.labels < b.labels;
    });
    if (out.size() > cfg_.n_best) out.resize(cfg_.n_best);
    return out;
  }

  const std::vector<Hypothesis>& hypotheses() const { return beam_; }

 private:
  struct VecHash {
    std::size_t operator()(const std::vector<int>& v) const {
      std::size_t h = v.size();
      for (int x : v) h = h * 1000003u ^ static_cast<std::size_t>(x);
      return h;
    }
  };

  Hypothesis& Slot(const std::vector<int>& prefix, const Hypothesis& src) {
    auto [it, inserted] = index_.try_emplace(prefix, next_.size());
    if (inserted) {
      Hypothesis h;
      h.prefix = prefix;
      h.lm_score = src.lm_score;
      h.word_count = src.word_count;
      next_.push_back(std::move(h));
    }
    return next_[it->second];
  }

  Hypothesis& Extended(std::vector<int> prefix, const Hypothesis& src, int c) {
    auto it = index_.find(prefix);
    if (it != index_.end()) return next_[it->second];
    Hypothesis h;
    h.lm_score = src.lm_score;
    if (cfg_.lm) h.lm_score += LmDelta(src.prefix, c);
    h.word_count = src.word_count;
    if (c == space_ && !src.prefix.empty() && src.prefix.back() != space_) ++h.word_count;
    h.prefix = std::move(prefix);
    index_.emplace(h.prefix, next_.size());
    next_.push_back(std::move(h));
    return next_.back();
  }

  /// Natural-log LM increment for appending `c` (or </s> when c < 0).
  double LmDelta(const std::vector<int>& prefix, int c) const {
    const std::size_t hmax = static_cast<std::size_t>(std::max(cfg_.lm->order() - 1, 0));
    std::vector<int> key;
    const std::size_t start = prefix.size() > hmax ? prefix.size() - hmax : 0;
    if (start == 0) key.push_back(-2);  // <s>
    key.insert(key.end(), prefix.begin() + static_cast<long>(start), prefix.end());
    key.push_back(c);
    if (auto it = lm_cache_.find(key); it != lm_cache_.end()) return it->second;
    std::vector<std::string> hist;
    for (std::size_t i = 0; i + 1 < key.size(); ++i)
      hist.push_back(key[i] == -2 ? std::string(kSentenceBegin) : alphabet_.Token(key[i]));
    const std::string sym = c < 0 ? std::string(kSentenceEnd) : alphabet_.Token(c);
    const double v = kLn10 * cfg_.lm->Score(hist, sym);
    lm_cache_.emplace(std::move(key), v);
    return v;
  }

  double PartialQ(const Hypothesis& h) const {
    return h.acoustic() + (cfg_.lm ? cfg_.alpha * h.lm_score : 0.0) + cfg_.beta * h.word_count;
  }

  void Prune() {
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(next_.size());
    // prefixes no path can reach (e.g. "aa" after two frames) are dropped
    for (std::size_t i = 0; i < next_.size(); ++i)
      if (next_[i].acoustic() != kLogZero) order.emplace_back(PartialQ(next_[i]), i);
    const std::size_t keep = std::min(cfg_.beam_width, order.size());
    auto better = [this](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return next_[a.second].prefix < next_[b.second].prefix;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(keep), order.end(), better);
    beam_.clear();
    for (std::size_t i = 0; i < keep; ++i) beam_.push_back(std::move(next_[order[i].second]));
  }

  const Alphabet& alphabet_;
  DecoderConfig cfg_;
  int space_ = -1;
  std::vector<Hypothesis> beam_;
  std::vector<Hypothesis> next_;
  std::unordered_map<std::vector<int>, std::size_t, VecHash> index_;
  mutable std::unordered_map<std::vector<int>, double, VecHash> lm_cache_;
};

/// Ranked hypotheses (at most cfg.n_best) for one lattice.
inline std::vector<DecodeResult> BeamSearch(const LogProbLattice& lat, const Alphabet& alphabet,
                                            const DecoderConfig& cfg) {
  if (lat.frames() == 0) return {DecodeResult{}};
  if (lat.vocab() != alphabet.size()) throw Error("lattice width does not match the alphabet");
  PrefixBeamSearch search(alphabet, cfg);
  for (std::size_t t = 0; t < lat.frames(); ++t) search.Step(lat.log_probs.row(t));
  return search.Finish();
}

/// `utt_id<TAB>hypothesis<TAB>Q<TAB>acoustic<TAB>lm<TAB>words`
inline void WriteDecodeRow(std::ostream& os, const std::string& utt, const DecodeResult& r) {
  os << utt << '\t' << r.text << '\t' << r.q << '\t' << r.acoustic << '\t' << r.lm_score << '\t'
     << r.words << '\n';
}

}  // namespace ctckit
