// ctckit/alphabet.hpp

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

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctckit/common.hpp"

namespace ctckit {

inline constexpr std::string_view kBlankMarker = "<blank>";
inline constexpr std::string_view kSpaceMarker = "<space>";

/// NFC-normalizes UTF-8 text.
inline std::string NormalizeNfc(std::string_view text) {
  UErrorCode err = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(err);
  if (U_FAILURE(err)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString out = nfc->normalize(in, err);
  if (U_FAILURE(err)) throw Error("NFC normalization failed");
  std::string result;
  out.toUTF8String(result);
  return result;
}

/// Splits UTF-8 text into Unicode scalar values, each as its own string.
inline std::vector<std::string> SplitScalars(std::string_view text) {
  std::vector<std::string> out;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  int32_t len = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < len) {
    int32_t start = i;
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0)
      throw Error("invalid UTF-8 at byte " + std::to_string(start));
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

/// Ordered grapheme inventory. The blank always occupies index 0; the
/// remaining symbols keep the order they were given in.
class Alphabet {
 public:
  Alphabet() = default;

  /// `symbols` must contain `kBlankMarker` exactly once. `kSpaceMarker` (or a
  /// literal " ") denotes the word separator.
  static Alphabet Build(const std::vector<std::string>& symbols) {
    Alphabet a;
    int blanks = 0;
    a.symbols_.emplace_back(kBlankMarker);
    for (const auto& raw : symbols) {
      if (raw == kBlankMarker) {
        ++blanks;
        continue;
      }
      std::string sym = raw == kSpaceMarker ? std::string(" ") : NormalizeNfc(raw);
      if (sym.empty()) throw Error("Alphabet: empty symbol");
      if (SplitScalars(sym).size() != 1)
        throw Error("Alphabet: symbol '" + sym +
                    "' is not a single Unicode scalar value");
      if (a.index_.count(sym)) throw Error("Alphabet: duplicate symbol '" + sym + "'");
      a.index_.emplace(sym, static_cast<int>(a.symbols_.size()));
      if (sym == " ") a.space_index_ = static_cast<int>(a.symbols_.size());
      a.symbols_.push_back(std::move(sym));
    }
    if (blanks == 0) throw Error("Alphabet: missing blank marker");
    if (blanks > 1) throw Error("Alphabet: duplicate symbol '<blank>'");
    return a;
  }

  /// One symbol per line; `<blank>` and `<space>` are markers.
  static Alphabet Load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open alphabet file " + path);
    std::vector<std::string> symbols;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      symbols.push_back(line);
    }
    return Build(symbols);
  }

  void Save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write alphabet file " + path);
    for (std::size_t i = 0; i < symbols_.size(); ++i) out << Token(i) << '\n';
  }

  std::size_t size() const { return symbols_.size(); }
  int blank_index() const { return 0; }
  std::optional<int> space_index() const { return space_index_; }
  const std::string& symbol(std::size_t id) const { return symbols_.at(id); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  /// File/ARPA-safe spelling of a symbol: markers for blank and space.
  std::string Token(std::size_t id) const {
    if (id == 0) return std::string(kBlankMarker);
    if (space_index_ && static_cast<int>(id) == *space_index_)
      return std::string(kSpaceMarker);
    return symbols_.at(id);
  }

  std::optional<int> Find(std::string_view sym) const {
    auto it = index_.find(std::string(sym));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<int> Encode(std::string_view text) const {
    std::vector<int> ids;
    auto scalars = SplitScalars(NormalizeNfc(text));
    ids.reserve(scalars.size());
    for (std::size_t pos = 0; pos < scalars.size(); ++pos) {
      auto it = index_.find(scalars[pos]);
      if (it == index_.end())
        throw Error("grapheme '" + scalars[pos] + "' at position " +
                    std::to_string(pos) + " is not in the alphabet");
      ids.push_back(it->second);
    }
    return ids;
  }

  std::string Decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size())
        throw Error("label id " + std::to_string(id) + " out of range");
      if (id == 0) throw Error("blank label cannot be decoded to text");
      out += symbols_[id];
    }
    return out;
  }

  /// Stable fingerprint of the inventory.
  std::uint64_t Fingerprint() const {
    std::uint64_t h = Fnv1a("alphabet");
    for (const auto& s : symbols_) h = Fnv1a(s + '\n', h);
    return h;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  std::optional<int> space_index_;
};

}  // namespace ctckit
