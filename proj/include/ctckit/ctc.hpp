// ctckit/ctc.hpp

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

// Connectionist temporal classification: the forward-backward loss and its
// gradient, Viterbi forced alignment over the same topology, and the
// argmax decoder with the collapse rule.
//
// The extended target interleaves blanks with the labels,
//   z' = (blank, z_1, blank, z_2, ..., z_L, blank),   |z'| = 2L + 1,
// so label j sits at extended position 2j + 1.

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ctckit/alphabet.hpp"
#include "ctckit/common.hpp"

namespace ctckit {

/// Per-frame log-probabilities (rows are frames). Rows must log-sum-exp
/// to zero.
struct LogProbLattice {
  Matrix<double> log_probs;
  int blank = 0;

  std::size_t frames() const { return log_probs.rows(); }
  std::size_t vocab() const { return log_probs.cols(); }

  /// Throws if any row is not normalized to within `tol` or has a positive
  /// entry.
  void Validate(double tol = 1e-4) const {
    for (std::size_t t = 0; t < frames(); ++t) {
      auto r = log_probs.row(t);
      for (double x : r)
        if (std::isnan(x) || x > tol)
          throw Error("lattice frame " + std::to_string(t) + " has an invalid log-probability");
      double z = LogSumExp(r);
      if (std::abs(z) > tol)
        throw Error("lattice frame " + std::to_string(t) + " is not normalized (logsumexp=" +
                    std::to_string(z) + ")");
    }
  }

  LogProbLattice SliceFrames(std::size_t begin, std::size_t end) const {
    return {log_probs.slice_rows(begin, end), blank};
  }
};

/// Thrown when the target cannot be emitted in the available frames.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

struct CtcResult {
  double loss = 0;       // negative log-likelihood, nats
  Matrix<double> grad;   // d loss / d log_probs
};

inline std::vector<int> ExtendTargets(std::span<const int> targets, int blank) {
  std::vector<int> ext(2 * targets.size() + 1, blank);
  for (std::size_t j = 0; j < targets.size(); ++j) ext[2 * j + 1] = targets[j];
  return ext;
}

/// Minimal frame count: one frame per label plus one blank between each
/// pair of equal neighbours.
inline std::size_t MinFrames(std::span<const int> targets) {
  std::size_t n = targets.size();
  for (std::size_t j = 1; j < targets.size(); ++j)
    if (targets[j] == targets[j - 1]) ++n;
  return n;
}

namespace detail {

inline void CheckTargets(const LogProbLattice& lat, std::span<const int> targets) {
  for (int z : targets) {
    if (z == lat.blank) throw Error("CTC targets contain the blank label");
    if (z < 0 || static_cast<std::size_t>(z) >= lat.vocab())
      throw Error("CTC target id " + std::to_string(z) + " out of range");
  }
}

inline void CheckFeasible(const LogProbLattice& lat, std::span<const int> targets) {
  if (lat.frames() < MinFrames(targets))
    throw InfeasibleError("CTC infeasible: " + std::to_string(lat.frames()) +
                          " frames for a target needing " +
                          std::to_string(MinFrames(targets)));
}

inline bool SkipAllowed(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

/// Log-space forward variables, alpha(t, s) includes the emission at t.
inline Matrix<double> Forward(const LogProbLattice& lat, const std::vector<int>& ext) {
  const std::size_t T = lat.frames(), S = ext.size();
  Matrix<double> alpha(T, S, kLogZero);
  if (T == 0) return alpha;
  alpha(0, 0) = lat.log_probs(0, ext[0]);
  if (S > 1) alpha(0, 1) = lat.log_probs(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = LogAdd(a, alpha(t - 1, s - 1));
      if (SkipAllowed(ext, s, lat.blank)) a = LogAdd(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kLogZero ? kLogZero : a + lat.log_probs(t, ext[s]);
    }
  }
  return alpha;
}

/// Log-space backward variables, beta(t, s) excludes the emission at t.
inline Matrix<double> Backward(const LogProbLattice& lat, const std::vector<int>& ext) {
  const std::size_t T = lat.frames(), S = ext.size();
  Matrix<double> beta(T, S, kLogZero);
  if (T == 0) return beta;
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + lat.log_probs(t + 1, ext[s]);
      if (s + 1 < S) b = LogAdd(b, beta(t + 1, s + 1) + lat.log_probs(t + 1, ext[s + 1]));
      if (s + 2 < S && SkipAllowed(ext, s + 2, lat.blank))
        b = LogAdd(b, beta(t + 1, s + 2) + lat.log_probs(t + 1, ext[s + 2]));
      beta(t, s) = b;
    }
  }
  return beta;
}

inline double FinalLogLikelihood(const Matrix<double>& alpha) {
  const std::size_t T = alpha.rows(), S = alpha.cols();
  double ll = alpha(T - 1, S - 1);
  if (S > 1) ll = LogAdd(ll, alpha(T - 1, S - 2));
  return ll;
}

}  // namespace detail

/// log P(targets | lattice) without feasibility checks; -inf when no
/// alignment exists.
inline double CtcLogLikelihood(const LogProbLattice& lat, std::span<const int> targets) {
  if (lat.frames() == 0) return targets.empty() ? 0.0 : kLogZero;
  const auto ext = ExtendTargets(targets, lat.blank);
  return detail::FinalLogLikelihood(detail::Forward(lat, ext));
}

/// CTC loss and its exact gradient with respect to the log-probabilities.
inline CtcResult CtcLoss(const LogProbLattice& lat, std::span<const int> targets) {
  detail::CheckTargets(lat, targets);
  detail::CheckFeasible(lat, targets);
  lat.Validate();
  const std::size_t T = lat.frames();
  CtcResult res;
  res.grad = Matrix<double>(T, lat.vocab(), 0.0);
  if (T == 0) return res;

  const auto ext = ExtendTargets(targets, lat.blank);
  const auto alpha = detail::Forward(lat, ext);
  const auto beta = detail::Backward(lat, ext);
  const double ll = detail::FinalLogLikelihood(alpha);
  res.loss = -ll;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < ext.size(); ++s) {
      double occ = alpha(t, s) + beta(t, s) - ll;
      if (occ == kLogZero) continue;
      res.grad(t, ext[s]) -= std::exp(occ);
    }
  }
  return res;
}

/// Composes CtcLoss with a row-wise log-softmax; the gradient is with
/// respect to the unnormalized scores.
inline CtcResult CtcLossFromLogits(const Matrix<double>& logits, std::span<const int> targets,
                                   int blank = 0) {
  LogProbLattice lat{logits, blank};
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    auto r = lat.log_probs.row(t);
    double z = LogSumExp(std::span<const double>(r));
    for (double& x : r) x -= z;
  }
  CtcResult res = CtcLoss(lat, targets);
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    double gsum = 0;
    for (double g : res.grad.row(t)) gsum += g;
    for (std::size_t k = 0; k < logits.cols(); ++k)
      res.grad(t, k) -= std::exp(lat.log_probs(t, k)) * gsum;
  }
  return res;
}

struct Alignment {
  std::vector<int> labels;     // per-frame label (blank included)
  std::vector<int> positions;  // per-frame extended-target index
  double log_prob = kLogZero;  // log-probability of the path
};

/// Most probable single path consistent with the targets. On equal scores
/// staying in a state beats advancing, and the lower extended index wins
/// any remaining tie.
inline Alignment ForcedAlignment(const LogProbLattice& lat, std::span<const int> targets) {
  detail::CheckTargets(lat, targets);
  detail::CheckFeasible(lat, targets);
  const std::size_t T = lat.frames();
  Alignment out;
  if (T == 0) {
    out.log_prob = 0;
    return out;
  }
  const auto ext = ExtendTargets(targets, lat.blank);
  const std::size_t S = ext.size();
  Matrix<double> delta(T, S, kLogZero);
  Matrix<int> back(T, S, -1);
  delta(0, 0) = lat.log_probs(0, ext[0]);
  if (S > 1) delta(0, 1) = lat.log_probs(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double best = delta(t - 1, s);
      int arg = static_cast<int>(s);
      if (detail::SkipAllowed(ext, s, lat.blank) && delta(t - 1, s - 2) > best) {
        best = delta(t - 1, s - 2);
        arg = static_cast<int>(s - 2);
      }
      if (s >= 1 && delta(t - 1, s - 1) > best) {
        best = delta(t - 1, s - 1);
        arg = static_cast<int>(s - 1);
      }
      if (best == kLogZero) continue;
      delta(t, s) = best + lat.log_probs(t, ext[s]);
      back(t, s) = arg;
    }
  }
  std::size_t s = S - 1;
  if (S > 1 && delta(T - 1, S - 2) >= delta(T - 1, S - 1)) s = S - 2;
  out.log_prob = delta(T - 1, s);
  out.labels.resize(T);
  out.positions.resize(T);
  for (std::size_t t = T; t-- > 0;) {
    out.positions[t] = static_cast<int>(s);
    out.labels[t] = ext[s];
    if (t > 0) s = static_cast<std::size_t>(back(t, s));
  }
  return out;
}

/// CTC mapping: merge adjacent duplicates, then drop blanks.
inline std::vector<int> Collapse(std::span<const int> frame_labels, int blank = 0) {
  std::vector<int> out;
  int prev = -1;
  for (int l : frame_labels) {
    if (l != prev && l != blank) out.push_back(l);
    prev = l;
  }
  return out;
}

inline std::vector<int> ArgMaxLabels(const LogProbLattice& lat) {
  std::vector<int> out(lat.frames());
  for (std::size_t t = 0; t < lat.frames(); ++t)
    out[t] = static_cast<int>(ArgMax(lat.log_probs.row(t)));
  return out;
}

inline std::vector<int> GreedyLabels(const LogProbLattice& lat) {
  return Collapse(ArgMaxLabels(lat), lat.blank);
}

inline std::string GreedyDecode(const LogProbLattice& lat, const Alphabet& alphabet) {
  return alphabet.Decode(GreedyLabels(lat));
}

/// Debug dump: `frame<TAB>extended_index<TAB>symbol` per frame.
inline void WriteAlignment(std::ostream& os, const Alignment& a, const Alphabet& alphabet) {
  for (std::size_t t = 0; t < a.labels.size(); ++t)
    os << t << '\t' << a.positions[t] << '\t' << alphabet.Token(a.labels[t]) << '\n';
}

}  // namespace ctckit
