// ctckit/net/train.hpp

// Copyright 2026   ctckit authors

// See ../../../LICENSE for clarification regarding multiple authors
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
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ctckit/ctc.hpp"
#include "ctckit/net/model.hpp"
#include "ctckit/scoring.hpp"
#include "ctckit/segctc.hpp"

namespace ctckit::net {

enum class OptimizerKind { kAdam, kSgdMomentum };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;
};

template <class S>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  /// One update of the trainable parameters at learning rate `lr`.
  void Step(ModelParams<S>& p, double lr) {
    const std::size_t n = p.trainable;
    if (m_.size() != n) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
      t_ = 0;
    }
    ++t_;
    if (cfg_.kind == OptimizerKind::kAdam) {
      const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
      for (std::size_t i = 0; i < n; ++i) {
        const double g = p.grads[i];
        m_[i] = cfg_.beta1 * m_[i] + (1 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1 - cfg_.beta2) * g * g;
        p.values[i] -= static_cast<S>(lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps));
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        m_[i] = cfg_.momentum * m_[i] + double(p.grads[i]);
        p.values[i] -= static_cast<S>(lr * m_[i]);
      }
    }
    ++p.step;
  }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

enum class LossKind { kCtc, kSegCtc };

struct TrainConfig {
  OptimizerConfig optimizer;
  double lr_decay = 1.0;    // per-epoch multiplier
  std::size_t batch_size = 8;
  int epochs = 10;
  int start_epoch = 0;      // nonzero when resuming
  bool sortagrad = true;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::kCtc;
  SegCtcConfig seg;
  double grad_clip = 0;     // max global gradient norm; 0 disables
  int space_id = -1;        // required by segctc

  void Validate() const {
    if (!(optimizer.lr > 0)) throw Error("TrainConfig: lr must be positive");
    if (!(lr_decay >= 0 && lr_decay <= 1)) throw Error("TrainConfig: lr_decay must be in [0, 1]");
    if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
    if (epochs < 0 || start_epoch < 0) throw Error("TrainConfig: epochs must be >= 0");
    if (grad_clip < 0) throw Error("TrainConfig: grad_clip must be >= 0");
    seg.Validate();
    if (loss == LossKind::kSegCtc && space_id < 0)
      throw Error("TrainConfig: segctc needs an alphabet with a space symbol");
  }
};

struct Utterance {
  std::string id;
  Matrix<float> features;
  std::vector<int> targets;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0;        // mean per-utterance loss
  double greedy_cer = 0;  // percent, from the training-mode outputs
  double lr = 0;
  double segmented_fraction = 0;
  double mean_word_len = 0;
  std::vector<std::size_t> batch_lengths;  // longest input per batch, in order
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Utterance order for one epoch: ascending length for epoch 0 under
/// sortagrad, a seeded shuffle otherwise.
inline std::vector<std::size_t> EpochOrder(const std::vector<Utterance>& data, int epoch,
                                           const TrainConfig& cfg) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  if (epoch == 0 && cfg.sortagrad) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data[a].features.rows() < data[b].features.rows();
    });
  } else {
    Rng rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

/// Runs cfg.epochs epochs starting at cfg.start_epoch. `on_epoch` (if set)
/// sees the metrics and the model after every epoch.
template <class S>
std::vector<EpochMetrics> Train(
    Model<S>& model, const std::vector<Utterance>& data, const TrainConfig& cfg,
    const std::function<void(const EpochMetrics&, const Model<S>&)>& on_epoch = {}) {
  cfg.Validate();
  if (data.empty()) throw Error("training set is empty");
  for (const auto& u : data) {
    std::size_t frames = model.OutputLength(u.features.rows());
    if (frames < MinFrames(u.targets))
      throw InfeasibleError("utterance " + u.id + " is infeasible for CTC (" +
                            std::to_string(frames) + " output frames)");
  }
  model.ReseedDropout(cfg.seed);
  Optimizer<S> opt(cfg.optimizer);
  std::vector<EpochMetrics> history;
  for (int e = cfg.start_epoch; e < cfg.start_epoch + cfg.epochs; ++e) {
    EpochMetrics m;
    m.epoch = e;
    m.lr = cfg.optimizer.lr * std::pow(cfg.lr_decay, double(e - cfg.start_epoch));
    const auto order = EpochOrder(data, e, cfg);
    double loss_sum = 0;
    std::size_t char_errors = 0, char_total = 0, segmented = 0, word_len_sum = 0;
    for (std::size_t b0 = 0, batch_id = 0; b0 < order.size(); b0 += cfg.batch_size, ++batch_id) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      Batch<S> x;
      std::size_t longest = 0;
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& f = data[order[i]].features;
        longest = std::max(longest, f.rows());
        if constexpr (std::is_same_v<S, float>) x.push_back(f);
        else x.push_back(f.template cast<S>());
      }
      m.batch_lengths.push_back(longest);
      model.ZeroGrad();
      Batch<S> y = model.Forward(x, true);
      Batch<S> dy;
      const double scale = 1.0 / double(b1 - b0);
      double batch_loss = 0;
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& u = data[order[i]];
        LogProbLattice lat{y[i - b0].template cast<double>(), 0};
        SegCtcOutcome out;
        if (cfg.loss == LossKind::kSegCtc) {
          out = SegCtc(lat, u.targets, cfg.seg, e, cfg.space_id);
        } else {
          out.result = CtcLoss(lat, u.targets);
        }
        if (out.word) {
          ++segmented;
          word_len_sum += out.word->length();
        }
        batch_loss += out.result.loss;
        Matrix<S> g(out.result.grad.rows(), out.result.grad.cols());
        for (std::size_t k = 0; k < g.data().size(); ++k)
          g.data()[k] = static_cast<S>(out.result.grad.data()[k] * scale);
        dy.push_back(std::move(g));
        const auto hyp = GreedyLabels(lat);
        char_errors += EditAlign<int>(u.targets, hyp).errors();
        char_total += u.targets.size();
      }
      if (!std::isfinite(batch_loss))
        throw TrainingDiverged("non-finite loss in epoch " + std::to_string(e) + ", batch " +
                               std::to_string(batch_id));
      loss_sum += batch_loss;
      model.Backward(dy);
      auto& p = model.params();
      if (cfg.grad_clip > 0) {
        double norm = 0;
        for (std::size_t k = 0; k < p.trainable; ++k) norm += double(p.grads[k]) * p.grads[k];
        norm = std::sqrt(norm);
        if (norm > cfg.grad_clip) {
          const S f = static_cast<S>(cfg.grad_clip / norm);
          for (std::size_t k = 0; k < p.trainable; ++k) p.grads[k] *= f;
        }
      }
      opt.Step(p, m.lr);
      for (std::size_t k = 0; k < p.values.size(); ++k)
        if (!std::isfinite(double(p.values[k])))
          throw TrainingDiverged("non-finite parameter after epoch " + std::to_string(e) +
                                 ", batch " + std::to_string(batch_id));
    }
    m.loss = loss_sum / double(data.size());
    m.greedy_cer = char_total ? 100.0 * double(char_errors) / double(char_total) : 0.0;
    m.segmented_fraction = double(segmented) / double(data.size());
    m.mean_word_len = segmented ? double(word_len_sum) / double(segmented) : 0.0;
    history.push_back(m);
    if (on_epoch) on_epoch(history.back(), model);
  }
  return history;
}

/// Eval-mode lattice for one feature matrix.
template <class S>
LogProbLattice Infer(Model<S>& model, const Matrix<float>& features) {
  Matrix<S> x;
  if constexpr (std::is_same_v<S, float>) x = features;
  else x = features.template cast<S>();
  return {model.Forward(x, false).template cast<double>(), 0};
}

}  // namespace ctckit::net
