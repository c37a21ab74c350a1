// ctckit/net/layers.hpp

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

// Layer primitives with hand-derived backpropagation. A batch is a list of
// variable-length sequences (frames x features); layers that mix frames
// (batch norm) see exactly the real frames of every member, which is what a
// zero-padded batch with a frame mask computes.

#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ctckit/common.hpp"

namespace ctckit::net {

using Rng = std::mt19937_64;

template <class S>
using Batch = std::vector<Matrix<S>>;

namespace detail {

// y[o] += sum_i W[o, i] x[i]
template <class S>
void Gemv(const S* w, const S* x, S* y, std::size_t out, std::size_t in) {
  for (std::size_t o = 0; o < out; ++o) {
    const S* wr = w + o * in;
    S acc = 0;
    for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
    y[o] += acc;
  }
}

// dx[i] += sum_o W[o, i] dy[o]
template <class S>
void GemvT(const S* w, const S* dy, S* dx, std::size_t out, std::size_t in) {
  for (std::size_t o = 0; o < out; ++o) {
    const S* wr = w + o * in;
    const S g = dy[o];
    if (g == S(0)) continue;
    for (std::size_t i = 0; i < in; ++i) dx[i] += wr[i] * g;
  }
}

// dW[o, i] += dy[o] x[i]
template <class S>
void Ger(S* dw, const S* dy, const S* x, std::size_t out, std::size_t in) {
  for (std::size_t o = 0; o < out; ++o) {
    const S g = dy[o];
    if (g == S(0)) continue;
    S* wr = dw + o * in;
    for (std::size_t i = 0; i < in; ++i) wr[i] += g * x[i];
  }
}

template <class S>
S Sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <class S>
void UniformInit(S* p, std::size_t n, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<S>(u(rng));
}

}  // namespace detail

template <class S>
class Layer {
 public:
  explicit Layer(std::size_t in_dim) : in_dim_(in_dim) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  std::size_t in_dim() const { return in_dim_; }
  virtual std::size_t out_dim() const = 0;
  virtual std::size_t OutputLength(std::size_t frames) const { return frames; }
  virtual std::size_t num_params() const { return 0; }
  virtual std::size_t num_buffers() const { return 0; }

  void Bind(S* params, S* grads, S* buffers) {
    params_ = params;
    grads_ = grads;
    buffers_ = buffers;
  }
  virtual void Init(Rng&) {}

  virtual Batch<S> Forward(const Batch<S>& x, bool training, Rng& rng) = 0;
  /// Accumulates parameter gradients; returns the input gradient.
  virtual Batch<S> Backward(const Batch<S>& dy) = 0;

 protected:
  std::size_t in_dim_;
  S* params_ = nullptr;
  S* grads_ = nullptr;
  S* buffers_ = nullptr;
};

/// y = W x + b per frame.
template <class S>
class Affine : public Layer<S> {
 public:
  Affine(std::size_t in, std::size_t out) : Layer<S>(in), out_(out) {}
  std::size_t out_dim() const override { return out_; }
  std::size_t num_params() const override { return out_ * this->in_dim_ + out_; }
  void Init(Rng& rng) override {
    detail::UniformInit(this->params_, num_params(), 1.0 / std::sqrt(double(this->in_dim_)), rng);
  }

  Batch<S> Forward(const Batch<S>& x, bool, Rng&) override {
    x_ = x;
    const std::size_t in = this->in_dim_;
    const S* w = this->params_;
    const S* b = w + out_ * in;
    Batch<S> y;
    for (const auto& m : x) {
      Matrix<S> o(m.rows(), out_);
      for (std::size_t t = 0; t < m.rows(); ++t) {
        std::copy(b, b + out_, o.row(t).data());
        detail::Gemv(w, m.row(t).data(), o.row(t).data(), out_, in);
      }
      y.push_back(std::move(o));
    }
    return y;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    const std::size_t in = this->in_dim_;
    S* dw = this->grads_;
    S* db = dw + out_ * in;
    Batch<S> dx;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      Matrix<S> d(dy[n].rows(), in);
      for (std::size_t t = 0; t < dy[n].rows(); ++t) {
        const S* g = dy[n].row(t).data();
        detail::Ger(dw, g, x_[n].row(t).data(), out_, in);
        for (std::size_t o = 0; o < out_; ++o) db[o] += g[o];
        detail::GemvT(this->params_, g, d.row(t).data(), out_, in);
      }
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  std::size_t out_;
  Batch<S> x_;
};

template <class S>
class LogSoftmax : public Layer<S> {
 public:
  using Layer<S>::Layer;
  std::size_t out_dim() const override { return this->in_dim_; }

  Batch<S> Forward(const Batch<S>& x, bool, Rng&) override {
    y_ = x;
    for (auto& m : y_) {
      for (std::size_t t = 0; t < m.rows(); ++t) {
        auto r = m.row(t);
        S z = LogSumExp(std::span<const S>(r));
        for (S& v : r) v -= z;
      }
    }
    return y_;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    Batch<S> dx = dy;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      for (std::size_t t = 0; t < dy[n].rows(); ++t) {
        S sum = 0;
        for (S g : dy[n].row(t)) sum += g;
        auto r = dx[n].row(t);
        auto y = y_[n].row(t);
        for (std::size_t k = 0; k < r.size(); ++k) r[k] -= std::exp(y[k]) * sum;
      }
    }
    return dx;
  }

 private:
  Batch<S> y_;
};

/// Concatenates k consecutive frames; trailing frames that do not fill a
/// group are dropped.
template <class S>
class FrameStack : public Layer<S> {
 public:
  FrameStack(std::size_t in, std::size_t k) : Layer<S>(in), k_(k) {
    if (k_ < 1) throw Error("frame_stack factor must be >= 1");
  }
  std::size_t out_dim() const override { return this->in_dim_ * k_; }
  std::size_t OutputLength(std::size_t frames) const override { return frames / k_; }

  Batch<S> Forward(const Batch<S>& x, bool, Rng&) override {
    lengths_.clear();
    Batch<S> y;
    for (const auto& m : x) {
      lengths_.push_back(m.rows());
      Matrix<S> o(m.rows() / k_, out_dim());
      std::copy(m.data().begin(), m.data().begin() + static_cast<long>(o.data().size()),
                o.data().begin());
      y.push_back(std::move(o));
    }
    return y;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    Batch<S> dx;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      Matrix<S> d(lengths_[n], this->in_dim_);
      std::copy(dy[n].data().begin(), dy[n].data().end(), d.data().begin());
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  std::size_t k_;
  std::vector<std::size_t> lengths_;
};

/// Inverted dropout; identity outside training.
template <class S>
class Dropout : public Layer<S> {
 public:
  Dropout(std::size_t in, double p) : Layer<S>(in), p_(p) {
    if (!(p >= 0.0 && p < 1.0)) throw Error("dropout probability must be in [0, 1)");
  }
  std::size_t out_dim() const override { return this->in_dim_; }

  Batch<S> Forward(const Batch<S>& x, bool training, Rng& rng) override {
    masks_.clear();
    if (!training || p_ == 0.0) return x;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const S scale = static_cast<S>(1.0 / (1.0 - p_));
    Batch<S> y = x;
    for (auto& m : y) {
      Matrix<S> mask(m.rows(), m.cols());
      for (std::size_t i = 0; i < m.data().size(); ++i) {
        mask.data()[i] = u(rng) < p_ ? S(0) : scale;
        m.data()[i] *= mask.data()[i];
      }
      masks_.push_back(std::move(mask));
    }
    return y;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    if (masks_.empty()) return dy;
    Batch<S> dx = dy;
    for (std::size_t n = 0; n < dx.size(); ++n)
      for (std::size_t i = 0; i < dx[n].data().size(); ++i) dx[n].data()[i] *= masks_[n].data()[i];
    return dx;
  }

 private:
  double p_;
  Batch<S> masks_;
};

/// 1-D convolution over time with zero padding (kernel - 1) / 2 on each
/// side, optionally followed by ReLU. Weights are [out][kernel][in].
template <class S>
class Conv1d : public Layer<S> {
 public:
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, bool relu)
      : Layer<S>(in), out_(out), kernel_(kernel), stride_(stride), relu_(relu) {
    if (kernel_ < 1 || stride_ < 1) throw Error("conv1d kernel and stride must be >= 1");
  }
  std::size_t out_dim() const override { return out_; }
  std::size_t num_params() const override { return out_ * kernel_ * this->in_dim_ + out_; }
  std::size_t OutputLength(std::size_t frames) const override {
    const std::size_t padded = frames + 2 * pad();
    if (padded < kernel_) return 0;
    return (padded - kernel_) / stride_ + 1;
  }
  void Init(Rng& rng) override {
    detail::UniformInit(this->params_, num_params(),
                        1.0 / std::sqrt(double(this->in_dim_ * kernel_)), rng);
  }

  Batch<S> Forward(const Batch<S>& x, bool, Rng&) override {
    x_ = x;
    y_.clear();
    const std::size_t in = this->in_dim_, kin = kernel_ * in;
    const S* w = this->params_;
    const S* b = w + out_ * kin;
    std::vector<S> window(kin);
    for (const auto& m : x) {
      const std::size_t T = m.rows(), To = OutputLength(T);
      Matrix<S> o(To, out_);
      for (std::size_t t = 0; t < To; ++t) {
        Gather(m, t, window);
        auto r = o.row(t);
        std::copy(b, b + out_, r.data());
        detail::Gemv(w, window.data(), r.data(), out_, kin);
        if (relu_)
          for (S& v : r) v = v > S(0) ? v : S(0);
      }
      y_.push_back(o);
    }
    return y_;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    const std::size_t in = this->in_dim_, kin = kernel_ * in;
    S* dw = this->grads_;
    S* db = dw + out_ * kin;
    std::vector<S> window(kin), dwin(kin), g(out_);
    Batch<S> dx;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      const auto& m = x_[n];
      Matrix<S> d(m.rows(), in);
      for (std::size_t t = 0; t < dy[n].rows(); ++t) {
        for (std::size_t o = 0; o < out_; ++o)
          g[o] = relu_ && y_[n](t, o) <= S(0) ? S(0) : dy[n](t, o);
        Gather(m, t, window);
        detail::Ger(dw, g.data(), window.data(), out_, kin);
        for (std::size_t o = 0; o < out_; ++o) db[o] += g[o];
        std::fill(dwin.begin(), dwin.end(), S(0));
        detail::GemvT(this->params_, g.data(), dwin.data(), out_, kin);
        for (std::size_t j = 0; j < kernel_; ++j) {
          long src = static_cast<long>(t * stride_ + j) - static_cast<long>(pad());
          if (src < 0 || src >= static_cast<long>(m.rows())) continue;
          auto dr = d.row(static_cast<std::size_t>(src));
          for (std::size_t i = 0; i < in; ++i) dr[i] += dwin[j * in + i];
        }
      }
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  std::size_t pad() const { return (kernel_ - 1) / 2; }

  void Gather(const Matrix<S>& m, std::size_t t, std::vector<S>& window) const {
    const std::size_t in = this->in_dim_;
    for (std::size_t j = 0; j < kernel_; ++j) {
      long src = static_cast<long>(t * stride_ + j) - static_cast<long>(pad());
      if (src < 0 || src >= static_cast<long>(m.rows())) {
        std::fill(window.begin() + j * in, window.begin() + (j + 1) * in, S(0));
      } else {
        auto r = m.row(static_cast<std::size_t>(src));
        std::copy(r.begin(), r.end(), window.begin() + j * in);
      }
    }
  }

  std::size_t out_, kernel_, stride_;
  bool relu_;
  Batch<S> x_, y_;
};

/// Normalizes each feature over all frames of the batch in training and
/// with running statistics otherwise. Params: gamma, beta. Buffers:
/// running mean, running variance.
template <class S>
class BatchNorm : public Layer<S> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  using Layer<S>::Layer;
  std::size_t out_dim() const override { return this->in_dim_; }
  std::size_t num_params() const override { return 2 * this->in_dim_; }
  std::size_t num_buffers() const override { return 2 * this->in_dim_; }
  void Init(Rng&) override {
    const std::size_t F = this->in_dim_;
    std::fill(this->params_, this->params_ + F, S(1));
    std::fill(this->params_ + F, this->params_ + 2 * F, S(0));
    std::fill(this->buffers_, this->buffers_ + F, S(0));
    std::fill(this->buffers_ + F, this->buffers_ + 2 * F, S(1));
  }

  Batch<S> Forward(const Batch<S>& x, bool training, Rng&) override {
    const std::size_t F = this->in_dim_;
    const S* gamma = this->params_;
    const S* beta = gamma + F;
    S* run_mean = this->buffers_;
    S* run_var = run_mean + F;
    training_ = training;
    inv_std_.assign(F, S(0));
    std::vector<double> mean(F, 0.0), var(F, 0.0);
    std::size_t N = 0;
    if (training) {
      for (const auto& m : x) {
        N += m.rows();
        for (std::size_t t = 0; t < m.rows(); ++t)
          for (std::size_t f = 0; f < F; ++f) mean[f] += m(t, f);
      }
      if (N == 0) throw Error("batch_norm: empty batch in training mode");
      for (double& v : mean) v /= double(N);
      for (const auto& m : x)
        for (std::size_t t = 0; t < m.rows(); ++t)
          for (std::size_t f = 0; f < F; ++f) {
            double d = m(t, f) - mean[f];
            var[f] += d * d;
          }
      for (std::size_t f = 0; f < F; ++f) {
        var[f] /= double(N);
        run_mean[f] = static_cast<S>((1 - kMomentum) * run_mean[f] + kMomentum * mean[f]);
        run_var[f] = static_cast<S>((1 - kMomentum) * run_var[f] + kMomentum * var[f]);
      }
    } else {
      for (std::size_t f = 0; f < F; ++f) {
        mean[f] = run_mean[f];
        var[f] = run_var[f];
      }
    }
    for (std::size_t f = 0; f < F; ++f) inv_std_[f] = static_cast<S>(1.0 / std::sqrt(var[f] + kEps));
    xhat_.clear();
    Batch<S> y;
    for (const auto& m : x) {
      Matrix<S> h(m.rows(), F), o(m.rows(), F);
      for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t f = 0; f < F; ++f) {
          h(t, f) = static_cast<S>((m(t, f) - mean[f]) * inv_std_[f]);
          o(t, f) = gamma[f] * h(t, f) + beta[f];
        }
      xhat_.push_back(std::move(h));
      y.push_back(std::move(o));
    }
    return y;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    const std::size_t F = this->in_dim_;
    const S* gamma = this->params_;
    S* dgamma = this->grads_;
    S* dbeta = dgamma + F;
    std::vector<double> sum_dh(F, 0.0), sum_dh_h(F, 0.0);
    std::size_t N = 0;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      N += dy[n].rows();
      for (std::size_t t = 0; t < dy[n].rows(); ++t)
        for (std::size_t f = 0; f < F; ++f) {
          const double g = dy[n](t, f);
          dgamma[f] += static_cast<S>(g * xhat_[n](t, f));
          dbeta[f] += static_cast<S>(g);
          const double dh = g * gamma[f];
          sum_dh[f] += dh;
          sum_dh_h[f] += dh * xhat_[n](t, f);
        }
    }
    Batch<S> dx;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      Matrix<S> d(dy[n].rows(), F);
      for (std::size_t t = 0; t < dy[n].rows(); ++t)
        for (std::size_t f = 0; f < F; ++f) {
          const double dh = double(dy[n](t, f)) * gamma[f];
          if (training_) {
            d(t, f) = static_cast<S>(inv_std_[f] *
                                     (dh - sum_dh[f] / double(N) -
                                      xhat_[n](t, f) * sum_dh_h[f] / double(N)));
          } else {
            d(t, f) = static_cast<S>(dh * inv_std_[f]);
          }
        }
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  bool training_ = false;
  std::vector<S> inv_std_;
  Batch<S> xhat_;
};

/// Bidirectional GRU; output is [forward, backward], 2H wide. Per direction:
/// W_x [3H x in], W_h [3H x H], b_x [3H], b_h [3H], gate order (r, z, n):
///
///   r = sigma(W_xr x + b_xr + W_hr h + b_hr)
///   z = sigma(W_xz x + b_xz + W_hz h + b_hz)
///   n = tanh(W_xn x + b_xn + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h
template <class S>
class BiGru : public Layer<S> {
 public:
  BiGru(std::size_t in, std::size_t hidden) : Layer<S>(in), h_(hidden) {
    if (h_ < 1) throw Error("bi_gru hidden size must be >= 1");
  }
  std::size_t out_dim() const override { return 2 * h_; }
  std::size_t num_params() const override { return 2 * DirParams(); }
  void Init(Rng& rng) override {
    for (int d = 0; d < 2; ++d) {
      S* p = this->params_ + d * DirParams();
      const std::size_t G = 3 * h_, in = this->in_dim_;
      detail::UniformInit(p, G * in, 1.0 / std::sqrt(double(in)), rng);
      detail::UniformInit(p + G * in, G * h_ + 2 * G, 1.0 / std::sqrt(double(h_)), rng);
    }
  }

  Batch<S> Forward(const Batch<S>& x, bool, Rng&) override {
    x_ = x;
    cache_.assign(x.size(), {});
    Batch<S> y;
    for (std::size_t n = 0; n < x.size(); ++n) {
      Matrix<S> o(x[n].rows(), 2 * h_);
      for (int d = 0; d < 2; ++d) RunDirection(x[n], d, o, cache_[n][d]);
      y.push_back(std::move(o));
    }
    return y;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    Batch<S> dx;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      Matrix<S> d(x_[n].rows(), this->in_dim_);
      for (int dir = 0; dir < 2; ++dir) BackDirection(x_[n], dir, dy[n], cache_[n][dir], d);
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  struct Cache {
    Matrix<S> r, z, n, hn, hprev;  // T x H each; hn = W_hn h + b_hn
  };

  std::size_t DirParams() const {
    const std::size_t G = 3 * h_;
    return G * this->in_dim_ + G * h_ + 2 * G;
  }

  void RunDirection(const Matrix<S>& x, int dir, Matrix<S>& out, Cache& c) const {
    const std::size_t T = x.rows(), H = h_, G = 3 * H, in = this->in_dim_;
    const S* wx = this->params_ + dir * DirParams();
    const S* wh = wx + G * in;
    const S* bx = wh + G * H;
    const S* bh = bx + G;
    c.r = c.z = c.n = c.hn = c.hprev = Matrix<S>(T, H);
    std::vector<S> h(H, S(0)), gx(G), gh(G);
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = dir == 0 ? step : T - 1 - step;
      std::copy(bx, bx + G, gx.begin());
      detail::Gemv(wx, x.row(t).data(), gx.data(), G, in);
      std::copy(bh, bh + G, gh.begin());
      detail::Gemv(wh, h.data(), gh.data(), G, H);
      for (std::size_t j = 0; j < H; ++j) {
        const S r = detail::Sigmoid(gx[j] + gh[j]);
        const S z = detail::Sigmoid(gx[H + j] + gh[H + j]);
        const S nn = std::tanh(gx[2 * H + j] + r * gh[2 * H + j]);
        c.r(t, j) = r;
        c.z(t, j) = z;
        c.n(t, j) = nn;
        c.hn(t, j) = gh[2 * H + j];
        c.hprev(t, j) = h[j];
      }
      for (std::size_t j = 0; j < H; ++j) {
        h[j] = (S(1) - c.z(t, j)) * c.n(t, j) + c.z(t, j) * h[j];
        out(t, dir * H + j) = h[j];
      }
    }
  }

  void BackDirection(const Matrix<S>& x, int dir, const Matrix<S>& dy, const Cache& c,
                     Matrix<S>& dx) {
    const std::size_t T = x.rows(), H = h_, G = 3 * H, in = this->in_dim_;
    const std::size_t off = dir * DirParams();
    const S* wx = this->params_ + off;
    const S* wh = wx + G * in;
    S* dwx = this->grads_ + off;
    S* dwh = dwx + G * in;
    S* dbx = dwh + G * H;
    S* dbh = dbx + G;
    std::vector<S> dh_next(H, S(0)), dgx(G), dgh(G), dh(H);
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = dir == 0 ? T - 1 - step : step;
      for (std::size_t j = 0; j < H; ++j) dh[j] = dy(t, dir * H + j) + dh_next[j];
      std::fill(dh_next.begin(), dh_next.end(), S(0));
      for (std::size_t j = 0; j < H; ++j) {
        const S r = c.r(t, j), z = c.z(t, j), nn = c.n(t, j), hp = c.hprev(t, j);
        const S dn = dh[j] * (S(1) - z);
        const S dz = dh[j] * (hp - nn);
        dh_next[j] = dh[j] * z;
        const S dan = dn * (S(1) - nn * nn);
        const S dr = dan * c.hn(t, j);
        const S dar = dr * r * (S(1) - r);
        const S daz = dz * z * (S(1) - z);
        dgx[j] = dar;
        dgx[H + j] = daz;
        dgx[2 * H + j] = dan;
        dgh[j] = dar;
        dgh[H + j] = daz;
        dgh[2 * H + j] = dan * r;
      }
      detail::Ger(dwx, dgx.data(), x.row(t).data(), G, in);
      detail::Ger(dwh, dgh.data(), c.hprev.row(t).data(), G, H);
      for (std::size_t g = 0; g < G; ++g) {
        dbx[g] += dgx[g];
        dbh[g] += dgh[g];
      }
      detail::GemvT(wx, dgx.data(), dx.row(t).data(), G, in);
      detail::GemvT(wh, dgh.data(), dh_next.data(), G, H);
    }
  }

  std::size_t h_;
  Batch<S> x_;
  std::vector<std::array<Cache, 2>> cache_;
};

/// Bidirectional LSTM; output is [forward, backward], 2H wide. Per direction:
/// W_x [4H x in], W_h [4H x H], b [4H], gate order (i, f, g, o).
template <class S>
class BiLstm : public Layer<S> {
 public:
  BiLstm(std::size_t in, std::size_t hidden) : Layer<S>(in), h_(hidden) {
    if (h_ < 1) throw Error("bi_lstm hidden size must be >= 1");
  }
  std::size_t out_dim() const override { return 2 * h_; }
  std::size_t num_params() const override { return 2 * DirParams(); }
  void Init(Rng& rng) override {
    for (int d = 0; d < 2; ++d) {
      S* p = this->params_ + d * DirParams();
      const std::size_t G = 4 * h_, in = this->in_dim_;
      detail::UniformInit(p, G * in, 1.0 / std::sqrt(double(in)), rng);
      detail::UniformInit(p + G * in, G * h_ + G, 1.0 / std::sqrt(double(h_)), rng);
    }
  }

  Batch<S> Forward(const Batch<S>& x, bool, Rng&) override {
    x_ = x;
    cache_.assign(x.size(), {});
    Batch<S> y;
    for (std::size_t n = 0; n < x.size(); ++n) {
      Matrix<S> o(x[n].rows(), 2 * h_);
      for (int d = 0; d < 2; ++d) RunDirection(x[n], d, o, cache_[n][d]);
      y.push_back(std::move(o));
    }
    return y;
  }

  Batch<S> Backward(const Batch<S>& dy) override {
    Batch<S> dx;
    for (std::size_t n = 0; n < dy.size(); ++n) {
      Matrix<S> d(x_[n].rows(), this->in_dim_);
      for (int dir = 0; dir < 2; ++dir) BackDirection(x_[n], dir, dy[n], cache_[n][dir], d);
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  struct Cache {
    Matrix<S> i, f, g, o, c, cprev, hprev;  // T x H each
  };

  std::size_t DirParams() const {
    const std::size_t G = 4 * h_;
    return G * this->in_dim_ + G * h_ + G;
  }

  void RunDirection(const Matrix<S>& x, int dir, Matrix<S>& out, Cache& c) const {
    const std::size_t T = x.rows(), H = h_, G = 4 * H, in = this->in_dim_;
    const S* wx = this->params_ + dir * DirParams();
    const S* wh = wx + G * in;
    const S* b = wh + G * H;
    c.i = c.f = c.g = c.o = c.c = c.cprev = c.hprev = Matrix<S>(T, H);
    std::vector<S> h(H, S(0)), cell(H, S(0)), a(G);
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = dir == 0 ? step : T - 1 - step;
      std::copy(b, b + G, a.begin());
      detail::Gemv(wx, x.row(t).data(), a.data(), G, in);
      detail::Gemv(wh, h.data(), a.data(), G, H);
      for (std::size_t j = 0; j < H; ++j) {
        const S ig = detail::Sigmoid(a[j]);
        const S fg = detail::Sigmoid(a[H + j]);
        const S gg = std::tanh(a[2 * H + j]);
        const S og = detail::Sigmoid(a[3 * H + j]);
        c.i(t, j) = ig;
        c.f(t, j) = fg;
        c.g(t, j) = gg;
        c.o(t, j) = og;
        c.cprev(t, j) = cell[j];
        c.hprev(t, j) = h[j];
        cell[j] = fg * cell[j] + ig * gg;
        c.c(t, j) = cell[j];
        h[j] = og * std::tanh(cell[j]);
        out(t, dir * H + j) = h[j];
      }
    }
  }

  void BackDirection(const Matrix<S>& x, int dir, const Matrix<S>& dy, const Cache& c,
                     Matrix<S>& dx) {
    const std::size_t T = x.rows(), H = h_, G = 4 * H, in = this->in_dim_;
    const std::size_t off = dir * DirParams();
    const S* wx = this->params_ + off;
    const S* wh = wx + G * in;
    S* dwx = this->grads_ + off;
    S* dwh = dwx + G * in;
    S* db = dwh + G * H;
    std::vector<S> dh_next(H, S(0)), dc_next(H, S(0)), da(G);
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = dir == 0 ? T - 1 - step : step;
      for (std::size_t j = 0; j < H; ++j) {
        const S dh = dy(t, dir * H + j) + dh_next[j];
        const S tc = std::tanh(c.c(t, j));
        const S ig = c.i(t, j), fg = c.f(t, j), gg = c.g(t, j), og = c.o(t, j);
        const S dc = dc_next[j] + dh * og * (S(1) - tc * tc);
        da[j] = dc * gg * ig * (S(1) - ig);
        da[H + j] = dc * c.cprev(t, j) * fg * (S(1) - fg);
        da[2 * H + j] = dc * ig * (S(1) - gg * gg);
        da[3 * H + j] = dh * tc * og * (S(1) - og);
        dc_next[j] = dc * fg;
      }
      std::fill(dh_next.begin(), dh_next.end(), S(0));
      detail::Ger(dwx, da.data(), x.row(t).data(), G, in);
      detail::Ger(dwh, da.data(), c.hprev.row(t).data(), G, H);
      for (std::size_t g = 0; g < G; ++g) db[g] += da[g];
      detail::GemvT(wx, da.data(), dx.row(t).data(), G, in);
      detail::GemvT(wh, da.data(), dh_next.data(), G, H);
    }
  }

  std::size_t h_;
  Batch<S> x_;
  std::vector<std::array<Cache, 2>> cache_;
};

}  // namespace ctckit::net
