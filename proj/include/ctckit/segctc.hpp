// ctckit/segctc.hpp

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

// Segmented CTC. A space-flanked word whose per-frame argmax agrees with the
// forced alignment is "well recognized"; the utterance is then cut into
//
//   [left) [left space) [word) [right space) [right)
//
// and the loss is the sum of five independent CTC losses, one per segment.
// Without a qualifying word the criterion is plain CTC.

#pragma once

#include <array>
#include <limits>
#include <optional>

#include "ctckit/ctc.hpp"

namespace ctckit {

struct SegCtcConfig {
  bool enabled = true;
  std::size_t min_word_len = 4;
  int warmup_epochs = 1;

  void Validate() const {
    if (min_word_len < 1) throw Error("SegCtcConfig: min_word_len must be >= 1");
    if (warmup_epochs < 0) throw Error("SegCtcConfig: warmup_epochs must be >= 0");
  }
};

/// A qualifying word. Character indices refer to the target sequence.
struct WordCandidate {
  std::size_t left_space = 0;   // target index of the left space
  std::size_t word_begin = 0;   // first word character
  std::size_t word_end = 0;     // one past the last word character
  std::size_t right_space = 0;  // target index of the right space
  std::size_t frame_begin = 0;  // first frame aligned to the left space
  std::size_t frame_end = 0;    // one past the last frame aligned to the right space

  std::size_t length() const { return word_end - word_begin; }
};

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct Segmentation {
  static constexpr std::size_t kParts = 5;
  std::array<Span, kParts> frames;   // partition of [0, T)
  std::array<Span, kParts> targets;  // partition of [0, L)
};

namespace detail {

/// [first, last] frames whose extended position equals `pos`, if any.
inline std::optional<std::pair<std::size_t, std::size_t>> FramesAt(const Alignment& a, int pos) {
  std::optional<std::pair<std::size_t, std::size_t>> r;
  for (std::size_t t = 0; t < a.positions.size(); ++t) {
    if (a.positions[t] != pos) continue;
    if (!r) r.emplace(t, t);
    r->second = t;
  }
  return r;
}

inline int ExtPos(std::size_t target_index) { return static_cast<int>(2 * target_index + 1); }

}  // namespace detail

/// Longest (earliest on ties) space-flanked word of at least
/// `cfg.min_word_len` characters whose frames, from the left space through
/// the right space, have argmax equal to the forced alignment label.
inline std::optional<WordCandidate> FindWellRecognizedWord(const LogProbLattice& lat,
                                                           std::span<const int> targets,
                                                           const Alignment& alignment,
                                                           const SegCtcConfig& cfg,
                                                           int space_id) {
  if (alignment.labels.size() != lat.frames())
    throw Error("alignment length does not match the lattice");
  const auto argmax = ArgMaxLabels(lat);
  std::optional<WordCandidate> best;
  const std::size_t L = targets.size();
  std::size_t i = 0;
  while (i < L) {
    if (targets[i] == space_id) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < L && targets[j] != space_id) ++j;
    // word occupies [i, j)
    const bool flanked = i > 0 && j < L;
    if (flanked && j - i >= cfg.min_word_len && (!best || j - i > best->length())) {
      auto lf = detail::FramesAt(alignment, detail::ExtPos(i - 1));
      auto rf = detail::FramesAt(alignment, detail::ExtPos(j));
      if (lf && rf) {
        bool agree = true;
        for (std::size_t t = lf->first; t <= rf->second && agree; ++t)
          agree = argmax[t] == alignment.labels[t];
        if (agree) best = WordCandidate{i - 1, i, j, j, lf->first, rf->second + 1};
      }
    }
    i = j;
  }
  return best;
}

/// Checks the partition invariants and per-segment feasibility.
inline void ValidateSegmentation(const Segmentation& seg, std::span<const int> targets,
                                 std::size_t num_frames, int space_id) {
  std::size_t f = 0, l = 0;
  for (std::size_t k = 0; k < Segmentation::kParts; ++k) {
    const auto& fs = seg.frames[k];
    const auto& ts = seg.targets[k];
    if (fs.begin != f || fs.end < fs.begin || ts.begin != l || ts.end < ts.begin)
      throw Error("segmentation: segments do not partition the utterance");
    if (fs.size() < MinFrames(targets.subspan(ts.begin, ts.size())))
      throw Error("segmentation: segment " + std::to_string(k) + " is infeasible");
    f = fs.end;
    l = ts.end;
  }
  if (f != num_frames || l != targets.size())
    throw Error("segmentation: segments do not cover the utterance");
  for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    const auto& ts = seg.targets[k];
    if (ts.size() != 1 || targets[ts.begin] != space_id)
      throw Error("segmentation: space segment does not hold exactly one space");
  }
}

/// Cuts at the first frame of the left space, the first frame of the word,
/// after the last frame of the word and after the last frame of the right
/// space.
inline Segmentation SegmentUtterance(const WordCandidate& cand, const Alignment& alignment,
                                     std::span<const int> targets, std::size_t num_frames,
                                     int space_id) {
  auto left = detail::FramesAt(alignment, detail::ExtPos(cand.left_space));
  auto first = detail::FramesAt(alignment, detail::ExtPos(cand.word_begin));
  auto last = detail::FramesAt(alignment, detail::ExtPos(cand.word_end - 1));
  auto right = detail::FramesAt(alignment, detail::ExtPos(cand.right_space));
  if (!left || !first || !last || !right)
    throw Error("segmentation: a boundary character has no aligned frame");
  const std::size_t a = left->first, b = first->first, c = last->second + 1,
                    d = right->second + 1;
  Segmentation seg;
  seg.frames = {Span{0, a}, Span{a, b}, Span{b, c}, Span{c, d}, Span{d, num_frames}};
  seg.targets = {Span{0, cand.left_space}, Span{cand.left_space, cand.word_begin},
                 Span{cand.word_begin, cand.word_end},
                 Span{cand.word_end, cand.right_space + 1},
                 Span{cand.right_space + 1, targets.size()}};
  ValidateSegmentation(seg, targets, num_frames, space_id);
  return seg;
}

struct SegCtcOutcome {
  CtcResult result;
  std::optional<WordCandidate> word;
  std::optional<Segmentation> segmentation;
};

/// Segmented criterion with diagnostics. `space_id` < 0 disables it.
inline SegCtcOutcome SegCtc(const LogProbLattice& lat, std::span<const int> targets,
                            const SegCtcConfig& cfg, int epoch, int space_id) {
  SegCtcOutcome out;
  if (!cfg.enabled || epoch < cfg.warmup_epochs || space_id < 0) {
    out.result = CtcLoss(lat, targets);
    return out;
  }
  const Alignment alignment = ForcedAlignment(lat, targets);
  out.word = FindWellRecognizedWord(lat, targets, alignment, cfg, space_id);
  if (!out.word) {
    out.result = CtcLoss(lat, targets);
    return out;
  }
  lat.Validate();
  const Segmentation seg =
      SegmentUtterance(*out.word, alignment, targets, lat.frames(), space_id);
  out.result.grad = Matrix<double>(lat.frames(), lat.vocab(), 0.0);
  for (std::size_t k = 0; k < Segmentation::kParts; ++k) {
    const Span fs = seg.frames[k], ts = seg.targets[k];
    if (fs.size() == 0) continue;  // empty target too, by feasibility
    CtcResult part = CtcLoss(lat.SliceFrames(fs.begin, fs.end), targets.subspan(ts.begin, ts.size()));
    out.result.loss += part.loss;
    for (std::size_t t = 0; t < fs.size(); ++t)
      for (std::size_t v = 0; v < lat.vocab(); ++v)
        out.result.grad(fs.begin + t, v) = part.grad(t, v);
  }
  out.segmentation = seg;
  return out;
}

inline CtcResult SegCtcLoss(const LogProbLattice& lat, std::span<const int> targets,
                            const SegCtcConfig& cfg, int epoch, int space_id) {
  return SegCtc(lat, targets, cfg, epoch, space_id).result;
}

}  // namespace ctckit
