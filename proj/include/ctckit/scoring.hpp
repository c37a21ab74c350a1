// ctckit/scoring.hpp

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

#pragma once

#include <algorithm>
#include <limits>
#include <tuple>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctckit/alphabet.hpp"
#include "ctckit/common.hpp"

namespace ctckit {

enum class EditOp { kMatch, kSubstitution, kInsertion, kDeletion };

struct EditAlignment {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  // (op, ref index, hyp index); -1 where the side is absent
  std::vector<std::tuple<EditOp, int, int>> ops;

  std::size_t errors() const { return substitutions + insertions + deletions; }
};

/// Unit-cost Levenshtein alignment. The backtrace prefers a diagonal step
/// (match or substitution), then a deletion, then an insertion.
template <class Tok>
EditAlignment EditAlign(std::span<const Tok> ref, std::span<const Tok> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  Matrix<std::size_t> d(n + 1, m + 1);
  for (std::size_t i = 0; i <= n; ++i) d(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) d(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d(i, j) = std::min({d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u),
                          d(i - 1, j) + 1, d(i, j - 1) + 1});
  EditAlignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d(i, j) == d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u)) {
      bool match = ref[i - 1] == hyp[j - 1];
      a.ops.emplace_back(match ? EditOp::kMatch : EditOp::kSubstitution, int(i - 1), int(j - 1));
      if (!match) ++a.substitutions;
      --i;
      --j;
    } else if (i > 0 && d(i, j) == d(i - 1, j) + 1) {
      a.ops.emplace_back(EditOp::kDeletion, int(i - 1), -1);
      ++a.deletions;
      --i;
    } else {
      a.ops.emplace_back(EditOp::kInsertion, -1, int(j - 1));
      ++a.insertions;
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

inline std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

struct UttScore {
  std::string id;
  std::size_t substitutions = 0, insertions = 0, deletions = 0, ref_tokens = 0;
};

struct ScoreReport {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_tokens = 0;
  std::vector<UttScore> utterances;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  /// Percentage; NaN when the reference is empty.
  double wer() const {
    if (ref_tokens == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref_tokens);
  }

  void Add(std::string id, const EditAlignment& a, std::size_t n_ref) {
    substitutions += a.substitutions;
    insertions += a.insertions;
    deletions += a.deletions;
    ref_tokens += n_ref;
    utterances.push_back({std::move(id), a.substitutions, a.insertions, a.deletions, n_ref});
  }
};

struct ScoreOptions {
  std::set<std::string> ignore_tokens;  // e.g. noise markers
  bool fragment_rule = false;           // drop tokens with a leading/trailing hyphen
  bool characters = false;              // score graphemes instead of words

  bool Ignored(const std::string& tok) const {
    if (ignore_tokens.count(tok)) return true;
    return fragment_rule && tok.size() > 1 && (tok.front() == '-' || tok.back() == '-');
  }
};

struct FilteredReport {
  ScoreReport raw;
  ScoreReport filtered;
};

inline std::vector<std::string> ScoringTokens(std::string_view text, bool characters) {
  return characters ? SplitScalars(NormalizeNfc(text)) : SplitWords(text);
}

/// Scores hypotheses against references keyed by utterance id. A missing
/// hypothesis counts as empty. The filtered report first removes ignored
/// tokens from the reference.
inline FilteredReport FilteredScore(const std::map<std::string, std::string>& refs,
                                    const std::map<std::string, std::string>& hyps,
                                    const ScoreOptions& opts = {}) {
  FilteredReport rep;
  for (const auto& [id, ref_text] : refs) {
    auto it = hyps.find(id);
    const auto hyp = ScoringTokens(it == hyps.end() ? "" : it->second, opts.characters);
    const auto ref = ScoringTokens(ref_text, opts.characters);
    rep.raw.Add(id, EditAlign<std::string>(ref, hyp), ref.size());
    std::vector<std::string> kept;
    for (const auto& t : ref)
      if (!opts.Ignored(t)) kept.push_back(t);
    rep.filtered.Add(id, EditAlign<std::string>(kept, hyp), kept.size());
  }
  return rep;
}

inline void WriteReportSummary(std::ostream& os, const FilteredReport& rep, bool filtered_used,
                               const char* metric = "WER") {
  auto line = [&os, metric](const char* name, const ScoreReport& r) {
    os << name << ": " << metric << ' '  << r.wer() << "% [ " << r.errors() << " / " << r.ref_tokens
       << ", " << r.insertions << " ins, " << r.deletions << " del, " << r.substitutions
       << " sub ]\n";
  };
  line("raw", rep.raw);
  line(filtered_used ? "filtered (approximate sclite)" : "filtered (no filter)", rep.filtered);
}

/// `utt_id<TAB>ref_tokens<TAB>sub<TAB>ins<TAB>del<TAB>filtered_ref_tokens<TAB>errors_filtered`
inline void WriteReportTsv(std::ostream& os, const FilteredReport& rep) {
  os << "utt_id\tref_tokens\tsub\tins\tdel\tfiltered_ref_tokens\tfiltered_errors\n";
  for (std::size_t i = 0; i < rep.raw.utterances.size(); ++i) {
    const auto& r = rep.raw.utterances[i];
    const auto& f = rep.filtered.utterances[i];
    os << r.id << '\t' << r.ref_tokens << '\t' << r.substitutions << '\t' << r.insertions
       << '\t' << r.deletions << '\t' << f.ref_tokens << '\t'
       << f.substitutions + f.insertions + f.deletions << '\n';
  }
}

}  // namespace ctckit
