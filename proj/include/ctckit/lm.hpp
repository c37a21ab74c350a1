// ctckit/lm.hpp

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

// Backoff n-gram language model over string tokens, trained with
// Witten-Bell smoothing and stored in ARPA form (log10 probabilities and
// log10 backoff weights).
//
// Training uses the interpolated Witten-Bell estimate, written in backoff
// form so that ARPA readers reproduce it exactly:
//
//   seen w:    P(w | h) = (c(h w) + T(h) P(w | h')) / (c(h) + T(h))
//   unseen w:  P(w | h) = bow(h) P(w | h'),   bow(h) = T(h) / (c(h) + T(h))
//
// where T(h) is the number of distinct continuations of h and h' drops the
// oldest token. The unigram level interpolates with the uniform
// distribution over the vocabulary.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctckit/common.hpp"

namespace ctckit {

inline constexpr std::string_view kSentenceBegin = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr double kOovLog10 = -99.0;

class NGramLM {
 public:
  struct Entry {
    double logprob = 0;  // log10
    double backoff = 0;  // log10
  };

  NGramLM() = default;

  /// `corpus` holds token sequences without boundary markers. Tokens in
  /// `extra_vocab` receive unigram mass even when unseen.
  static NGramLM Train(const std::vector<std::vector<std::string>>& corpus, int order = 3,
                       const std::vector<std::string>& extra_vocab = {}) {
    if (corpus.empty()) throw Error("cannot train a language model on an empty corpus");
    if (order < 1) throw Error("n-gram order must be >= 1");
    NGramLM lm;
    lm.order_ = order;
    lm.tables_.assign(order, {});
    lm.counts_.assign(order, {});
    for (const auto& sent : corpus) {
      std::vector<std::string> s;
      s.reserve(sent.size() + 2);
      s.emplace_back(kSentenceBegin);
      for (const auto& w : sent) {
        if (w == kSentenceBegin || w == kSentenceEnd)
          throw Error("corpus contains a sentence boundary token");
        s.push_back(w);
      }
      s.emplace_back(kSentenceEnd);
      for (std::size_t i = 1; i < s.size(); ++i)
        for (int k = 1; k <= order && static_cast<int>(i) - k + 1 >= 0; ++k)
          ++lm.counts_[k - 1][Join(std::span(s).subspan(i - k + 1, k))];
    }

    // unigrams
    std::set<std::string> vocab;
    for (const auto& [w, c] : lm.counts_[0]) vocab.insert(w);
    for (const auto& w : extra_vocab)
      if (w != kSentenceBegin) vocab.insert(w);
    vocab.insert(std::string(kSentenceEnd));
    double total = 0;
    for (const auto& [w, c] : lm.counts_[0]) total += static_cast<double>(c);
    const double types = static_cast<double>(lm.counts_[0].size());
    for (const auto& w : vocab) {
      auto it = lm.counts_[0].find(w);
      double c = it == lm.counts_[0].end() ? 0.0 : static_cast<double>(it->second);
      lm.tables_[0][w].logprob =
          std::log10((c + types / static_cast<double>(vocab.size())) / (total + types));
    }
    lm.tables_[0][std::string(kSentenceBegin)].logprob = kOovLog10;

    // higher orders, lowest first so that P(w | h') is available
    for (int k = 2; k <= order; ++k) {
      struct Hist {
        double total = 0;
        double types = 0;
      };
      std::unordered_map<std::string, Hist> hist;
      for (const auto& [key, c] : lm.counts_[k - 1]) {
        auto& h = hist[HistoryOf(key)];
        h.total += static_cast<double>(c);
        h.types += 1;
      }
      for (const auto& [key, c] : lm.counts_[k - 1]) {
        auto toks = Split(key);
        const auto& h = hist[HistoryOf(key)];
        std::span<const std::string> shorter(toks.data() + 1, toks.size() - 2);
        double lower = std::pow(10.0, lm.Score(shorter, toks.back()));
        lm.tables_[k - 1][key].logprob =
            std::log10((static_cast<double>(c) + h.types * lower) / (h.total + h.types));
      }
      for (const auto& [hkey, h] : hist)
        lm.tables_[k - 2][hkey].backoff = std::log10(h.types / (h.total + h.types));
    }
    return lm;
  }

  int order() const { return order_; }

  /// log10 P(symbol | history); only the last order-1 history tokens
  /// matter. Unknown symbols score kOovLog10.
  double Score(std::span<const std::string> history, const std::string& symbol) const {
    if (order_ == 0) throw Error("language model is empty");
    std::size_t hlen = std::min<std::size_t>(history.size(), order_ - 1);
    auto h = history.subspan(history.size() - hlen, hlen);
    double acc = 0;
    while (true) {
      std::string key = h.empty() ? symbol : Join(h) + ' ' + symbol;
      const auto& table = tables_[h.size()];
      if (auto it = table.find(key); it != table.end()) return acc + it->second.logprob;
      if (h.empty()) return kOovLog10;
      const auto& htable = tables_[h.size() - 1];
      if (auto it = htable.find(Join(h)); it != htable.end()) acc += it->second.backoff;
      h = h.subspan(1);
    }
  }

  /// Sum of per-token scores; with boundaries, the history starts at <s>
  /// and </s> is scored at the end.
  double SentenceScore(std::span<const std::string> tokens, bool boundaries = true) const {
    std::vector<std::string> hist;
    if (boundaries) hist.emplace_back(kSentenceBegin);
    double total = 0;
    for (const auto& w : tokens) {
      total += Score(hist, w);
      hist.push_back(w);
    }
    if (boundaries) total += Score(hist, std::string(kSentenceEnd));
    return total;
  }

  bool Contains(const std::string& token) const {
    return order_ > 0 && tables_[0].count(token) > 0;
  }

  /// Predictable tokens: the unigram vocabulary without <s>.
  std::vector<std::string> Vocabulary() const {
    std::vector<std::string> v;
    if (order_ == 0) return v;
    for (const auto& [w, e] : tables_[0])
      if (w != kSentenceBegin) v.push_back(w);
    std::sort(v.begin(), v.end());
    return v;
  }

  /// Raw training count of an n-gram (0 for models read from ARPA).
  std::uint64_t Count(std::span<const std::string> ngram) const {
    if (ngram.empty() || ngram.size() > counts_.size()) return 0;
    const auto& m = counts_[ngram.size() - 1];
    auto it = m.find(Join(ngram));
    return it == m.end() ? 0 : it->second;
  }

  const Entry* Find(std::span<const std::string> ngram) const {
    if (ngram.empty() || static_cast<int>(ngram.size()) > order_) return nullptr;
    const auto& t = tables_[ngram.size() - 1];
    auto it = t.find(Join(ngram));
    return it == t.end() ? nullptr : &it->second;
  }

  std::size_t NumNgrams(int k) const { return tables_.at(k - 1).size(); }

  void WriteArpa(std::ostream& os) const {
    os << "\n\\data\\\n";
    for (int k = 1; k <= order_; ++k) os << "ngram " << k << '=' << tables_[k - 1].size() << '\n';
    for (int k = 1; k <= order_; ++k) {
      os << "\n\\" << k << "-grams:\n";
      std::map<std::string, Entry> sorted(tables_[k - 1].begin(), tables_[k - 1].end());
      for (const auto& [key, e] : sorted) {
        os << FormatLog(e.logprob) << '\t' << key;
        if (k < order_) os << '\t' << FormatLog(e.backoff);
        os << '\n';
      }
    }
    os << "\n\\end\\\n";
  }

  void SaveArpa(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    WriteArpa(out);
  }

  static NGramLM ReadArpa(std::istream& in) {
    NGramLM lm;
    std::vector<std::size_t> declared;
    std::string line;
    std::size_t lineno = 0;
    enum { kPreamble, kHeader, kBody, kDone } state = kPreamble;
    int section = 0;
    std::size_t section_line = 0;
    auto fail = [&](const std::string& msg) {
      throw Error("ARPA line " + std::to_string(lineno) + ": " + msg);
    };
    auto close_section = [&]() {
      if (section == 0) return;
      if (lm.tables_[section - 1].size() != declared[section - 1])
        fail("expected " + std::to_string(declared[section - 1]) + " " +
             std::to_string(section) + "-grams (section at line " +
             std::to_string(section_line) + "), found " +
             std::to_string(lm.tables_[section - 1].size()));
    };
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (state == kPreamble) {
        if (line == "\\data\\") state = kHeader;
        else if (!Trim(line).empty() && line[0] == '\\') fail("expected \\data\\");
        continue;
      }
      if (state == kDone) continue;
      std::string t = Trim(line);
      if (t.empty()) continue;
      if (state == kHeader) {
        if (t.rfind("ngram ", 0) == 0) {
          auto eq = t.find('=');
          if (eq == std::string::npos) fail("malformed ngram count line");
          int k = ParseInt(Trim(t.substr(6, eq - 6)));
          long n = ParseInt(Trim(t.substr(eq + 1)));
          if (k != static_cast<int>(declared.size()) + 1 || n < 0)
            fail("malformed ngram count line");
          declared.push_back(static_cast<std::size_t>(n));
          continue;
        }
        if (declared.empty()) fail("no ngram counts in \\data\\ section");
        state = kBody;
        lm.order_ = static_cast<int>(declared.size());
        lm.tables_.assign(lm.order_, {});
      }
      if (t == "\\end\\") {
        close_section();
        state = kDone;
        continue;
      }
      if (t[0] == '\\') {
        close_section();
        int k = 0;
        if (t.size() < 9 || t.substr(t.size() - 7) != "-grams:" ||
            (k = ParseInt(t.substr(1, t.size() - 8))) != section + 1 || k > lm.order_)
          fail("unexpected section header '" + t + "'");
        section = k;
        section_line = lineno;
        continue;
      }
      if (section == 0) fail("n-gram entry outside a section");
      std::vector<std::string> fields;
      std::istringstream fs(t);
      for (std::string f; fs >> f;) fields.push_back(f);
      const std::size_t n = static_cast<std::size_t>(section);
      if (fields.size() != n + 1 && fields.size() != n + 2) fail("garbled n-gram line");
      Entry e;
      if (!ParseDouble(fields[0], e.logprob)) fail("bad log-probability '" + fields[0] + "'");
      if (fields.size() == n + 2 && !ParseDouble(fields.back(), e.backoff))
        fail("bad backoff weight '" + fields.back() + "'");
      if (section == lm.order_) e.backoff = 0;  // never consulted; some toolkits write it
      std::span<const std::string> words(fields.data() + 1, n);
      if (!lm.tables_[section - 1].emplace(Join(words), e).second) fail("duplicate n-gram");
    }
    if (state != kDone) {
      ++lineno;
      fail(state == kPreamble ? "missing \\data\\ section" : "missing \\end\\ marker");
    }
    return lm;
  }

  static NGramLM LoadArpa(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
      return ReadArpa(in);
    } catch (const Error& e) {
      throw Error(path + ": " + e.what());
    }
  }

 private:
  static std::string Join(std::span<const std::string> toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) s += ' ';
      s += toks[i];
    }
    return s;
  }
  static std::vector<std::string> Split(const std::string& key) {
    std::vector<std::string> out;
    std::istringstream is(key);
    for (std::string w; is >> w;) out.push_back(w);
    return out;
  }
  static std::string HistoryOf(const std::string& key) {
    return key.substr(0, key.rfind(' '));
  }
  static std::string Trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
  }
  static int ParseInt(const std::string& s) {
    int v = -1;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return -1;
    return v;
  }
  static bool ParseDouble(const std::string& s, double& v) {
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(v);
  }
  static std::string FormatLog(double v) {
    if (v <= kOovLog10) return "-99";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.7f", v);
    return buf;
  }

  int order_ = 0;
  std::vector<std::unordered_map<std::string, Entry>> tables_;
  std::vector<std::unordered_map<std::string, std::uint64_t>> counts_;
};

}  // namespace ctckit
