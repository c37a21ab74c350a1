// tests/net_checks.hpp

// Copyright 2026   ctckit authors

// See ../LICENSE for clarification regarding multiple authors
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

// Finite-difference and overfit checks for the network layers, shared by
// the unit tests and the acceptance binary.

#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "ctckit/net/train.hpp"
#include "oracles.hpp"

namespace netcheck {

using ctckit::Matrix;
using ctckit::net::Batch;
using ctckit::net::Model;
using ctckit::net::ModelSpec;

struct FdReport {
  double max_rel_err = 0;
  std::size_t checked = 0;
};

inline Batch<double> RandomBatch(const std::vector<std::size_t>& lengths, std::size_t dim,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Batch<double> x;
  for (std::size_t T : lengths) {
    Matrix<double> m(T, dim);
    for (double& v : m.data()) v = n(rng);
    x.push_back(std::move(m));
  }
  return x;
}

/// Central differences of L = sum(w * model(x)) against the analytic
/// parameter gradient, in f64. Dropout masks are replayed by reseeding.
inline FdReport CheckParamGradients(const std::vector<std::string>& layers, std::size_t in_dim,
                                    const std::vector<std::size_t>& lengths, std::uint64_t seed,
                                    double h = 1e-4, double floor = 1e-6) {
  Model<double> model(ModelSpec::Parse(layers), in_dim, seed);
  std::mt19937_64 rng(seed + 17);
  const auto x = RandomBatch(lengths, in_dim, rng);
  Batch<double> w;
  {
    model.ReseedDropout(seed);
    auto y = model.Forward(x, true);
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto& m : y) {
      Matrix<double> g(m.rows(), m.cols());
      for (double& v : g.data()) v = n(rng);
      w.push_back(std::move(g));
    }
  }
  auto loss = [&] {
    model.ReseedDropout(seed);
    auto y = model.Forward(x, true);
    double s = 0;
    for (std::size_t n = 0; n < y.size(); ++n)
      for (std::size_t i = 0; i < y[n].data().size(); ++i) s += w[n].data()[i] * y[n].data()[i];
    return s;
  };
  model.ZeroGrad();
  loss();
  model.Backward(w);
  auto& p = model.params();
  const std::vector<double> analytic(p.grads.begin(), p.grads.end());
  FdReport rep;
  for (std::size_t i = 0; i < p.trainable; ++i) {
    const double keep = p.values[i];
    p.values[i] = keep + h;
    const double up = loss();
    p.values[i] = keep - h;
    const double down = loss();
    p.values[i] = keep;
    const double fd = (up - down) / (2 * h);
    rep.max_rel_err = std::max(rep.max_rel_err, oracle::RelErr(fd, analytic[i], floor));
    ++rep.checked;
  }
  return rep;
}

/// The layer stacks checked for every kind; layers without parameters sit
/// between two affine layers so their input gradient is exercised.
inline std::vector<std::pair<std::string, std::vector<std::string>>> LayerCases() {
  return {
      {"conv1d", {"conv1d(4,3,1)", "affine(3)", "log_softmax"}},
      {"conv1d_linear", {"conv1d(4,3,1,linear)", "affine(3)", "log_softmax"}},
      {"conv1d_stride", {"conv1d(4,5,2,linear)", "affine(3)", "log_softmax"}},
      {"batch_norm", {"affine(4)", "batch_norm", "affine(3)", "log_softmax"}},
      {"dropout", {"affine(4)", "dropout(0.3)", "affine(3)", "log_softmax"}},
      {"bi_gru", {"bi_gru(3)", "affine(3)", "log_softmax"}},
      {"bi_lstm", {"bi_lstm(3)", "affine(3)", "log_softmax"}},
      {"affine", {"affine(4)", "affine(3)", "log_softmax"}},
      {"log_softmax", {"affine(3)", "log_softmax"}},
      {"frame_stack", {"affine(4)", "frame_stack(2)", "affine(3)", "log_softmax"}},
  };
}

/// One utterance, repeated Adam steps with plain CTC. Returns the loss of
/// the final step.
inline double OverfitSingleUtterance(std::uint64_t seed, int steps = 200) {
  using namespace ctckit::net;
  std::mt19937_64 rng(seed);
  const std::size_t T = 40, F = 8, V = 5;
  Utterance u;
  u.id = "u";
  u.features = Matrix<float>(T, F);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (float& v : u.features.data()) v = n(rng);
  u.targets = {1, 2, 3, 3, 4, 1, 2};
  Model<float> model(ModelSpec::Parse({"bi_gru(16)", "affine(" + std::to_string(V) + ")",
                                       "log_softmax"}),
                     F, seed);
  TrainConfig cfg;
  cfg.optimizer.lr = 0.02;
  cfg.batch_size = 1;
  cfg.epochs = steps;
  cfg.seed = seed;
  auto hist = Train(model, {u}, cfg);
  return ctckit::CtcLoss(Infer(model, u.features), u.targets).loss;
}

}  // namespace netcheck
