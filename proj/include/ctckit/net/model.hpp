// ctckit/net/model.hpp

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

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ctckit/net/layers.hpp"

namespace ctckit::net {

enum class LayerKind {
  kConv1d,
  kBatchNorm,
  kDropout,
  kBiGru,
  kBiLstm,
  kAffine,
  kLogSoftmax,
  kFrameStack,
};

/// One layer of a model description. Text form, e.g. `conv1d(32,5,1)`,
/// `conv1d(32,5,2,linear)`, `batch_norm`, `dropout(0.2)`, `bi_gru(64)`,
/// `bi_lstm(64)`, `affine(32)`, `log_softmax`, `frame_stack(2)`.
struct LayerSpec {
  LayerKind kind = LayerKind::kAffine;
  std::size_t size = 0;    // out channels / hidden units / affine outputs / stack factor
  std::size_t kernel = 1;  // conv1d
  std::size_t stride = 1;  // conv1d
  bool relu = true;        // conv1d
  double p = 0;            // dropout

  std::string ToString() const {
    std::ostringstream os;
    switch (kind) {
      case LayerKind::kConv1d:
        os << "conv1d(" << size << ',' << kernel << ',' << stride << (relu ? "" : ",linear") << ')';
        break;
      case LayerKind::kBatchNorm: os << "batch_norm"; break;
      case LayerKind::kDropout: os << "dropout(" << p << ')'; break;
      case LayerKind::kBiGru: os << "bi_gru(" << size << ')'; break;
      case LayerKind::kBiLstm: os << "bi_lstm(" << size << ')'; break;
      case LayerKind::kAffine: os << "affine(" << size << ')'; break;
      case LayerKind::kLogSoftmax: os << "log_softmax"; break;
      case LayerKind::kFrameStack: os << "frame_stack(" << size << ')'; break;
    }
    return os.str();
  }

  static LayerSpec Parse(const std::string& text) {
    std::string name = text, args;
    if (auto lp = text.find('('); lp != std::string::npos) {
      if (text.back() != ')') throw Error("malformed layer '" + text + "'");
      name = text.substr(0, lp);
      args = text.substr(lp + 1, text.size() - lp - 2);
    }
    std::vector<std::string> a;
    std::stringstream ss(args);
    for (std::string tok; std::getline(ss, tok, ',');) a.push_back(tok);
    auto num = [&](std::size_t i) -> std::size_t {
      if (i >= a.size()) throw Error("layer '" + text + "' is missing arguments");
      try {
        std::size_t pos = 0;
        long v = std::stol(a[i], &pos);
        if (pos != a[i].size() || v < 1) throw Error("");
        return static_cast<std::size_t>(v);
      } catch (...) {
        throw Error("layer '" + text + "': bad argument '" + a[i] + "'");
      }
    };
    auto expect = [&](std::size_t lo, std::size_t hi) {
      if (a.size() < lo || a.size() > hi)
        throw Error("layer '" + text + "' has the wrong number of arguments");
    };
    LayerSpec s;
    if (name == "conv1d") {
      expect(2, 4);
      s.kind = LayerKind::kConv1d;
      s.size = num(0);
      s.kernel = num(1);
      if (a.size() >= 3) s.stride = num(2);
      if (a.size() == 4) {
        if (a[3] == "linear") s.relu = false;
        else if (a[3] != "relu") throw Error("layer '" + text + "': unknown activation");
      }
    } else if (name == "batch_norm") {
      expect(0, 0);
      s.kind = LayerKind::kBatchNorm;
    } else if (name == "dropout") {
      expect(1, 1);
      s.kind = LayerKind::kDropout;
      try {
        s.p = std::stod(a[0]);
      } catch (...) {
        throw Error("layer '" + text + "': bad dropout probability");
      }
    } else if (name == "bi_gru" || name == "bi_lstm") {
      expect(1, 1);
      s.kind = name == "bi_gru" ? LayerKind::kBiGru : LayerKind::kBiLstm;
      s.size = num(0);
    } else if (name == "affine") {
      expect(1, 1);
      s.kind = LayerKind::kAffine;
      s.size = num(0);
    } else if (name == "log_softmax") {
      expect(0, 0);
      s.kind = LayerKind::kLogSoftmax;
    } else if (name == "frame_stack") {
      expect(1, 1);
      s.kind = LayerKind::kFrameStack;
      s.size = num(0);
    } else {
      throw Error("unknown layer kind '" + name + "'");
    }
    return s;
  }
};

struct ModelSpec {
  std::vector<LayerSpec> layers;

  static ModelSpec Parse(const std::vector<std::string>& layers) {
    ModelSpec m;
    for (const auto& l : layers) m.layers.push_back(LayerSpec::Parse(l));
    return m;
  }

  std::string ToString() const {
    std::string s;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (i) s += ',';
      s += layers[i].ToString();
    }
    return s;
  }

  /// Output width (the vocabulary size).
  std::size_t vocab() const { return layers.size() >= 2 ? layers[layers.size() - 2].size : 0; }

  void Validate() const {
    const std::size_t n = layers.size();
    if (n < 2 || layers[n - 2].kind != LayerKind::kAffine ||
        layers[n - 1].kind != LayerKind::kLogSoftmax)
      throw Error("model must end with affine(V) followed by log_softmax");
  }
};

/// Flat parameter store: trainable parameters followed by non-trainable
/// buffers (batch-norm running statistics). Gradients cover the trainable
/// part only.
template <class S>
struct ModelParams {
  std::vector<S> values;
  std::vector<S> grads;
  std::size_t trainable = 0;
  std::uint64_t step = 0;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

template <class S>
class Model {
 public:
  Model(ModelSpec spec, std::size_t input_dim, std::uint64_t seed)
      : spec_(std::move(spec)), input_dim_(input_dim), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    spec_.Validate();
    std::size_t dim = input_dim;
    for (const auto& ls : spec_.layers) {
      layers_.push_back(MakeLayer(ls, dim));
      dim = layers_.back()->out_dim();
    }
    output_dim_ = dim;
    std::size_t np = 0, nb = 0;
    for (const auto& l : layers_) {
      np += l->num_params();
      nb += l->num_buffers();
    }
    params_.values.assign(np + nb, S(0));
    params_.grads.assign(np, S(0));
    params_.trainable = np;
    std::size_t po = 0, bo = np;
    for (auto& l : layers_) {
      l->Bind(params_.values.data() + po, params_.grads.data() + po, params_.values.data() + bo);
      po += l->num_params();
      bo += l->num_buffers();
    }
    Rng init(seed);
    for (auto& l : layers_) l->Init(init);
  }

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  ModelParams<S>& params() { return params_; }
  const ModelParams<S>& params() const { return params_; }

  std::size_t OutputLength(std::size_t frames) const {
    for (const auto& l : layers_) frames = l->OutputLength(frames);
    return frames;
  }

  /// Fingerprint of architecture and input width.
  std::uint64_t SpecHash() const {
    return Fnv1a(spec_.ToString() + "|in=" + std::to_string(input_dim_));
  }

  void ReseedDropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  Batch<S> Forward(const Batch<S>& x, bool training) {
    for (const auto& m : x) {
      if (m.cols() != input_dim_)
        throw Error("feature width " + std::to_string(m.cols()) + " does not match model input " +
                    std::to_string(input_dim_));
      if (OutputLength(m.rows()) == 0)
        throw Error("input of " + std::to_string(m.rows()) +
                    " frames is shorter than the model's receptive field");
    }
    Batch<S> h = x;
    for (auto& l : layers_) h = l->Forward(h, training, dropout_rng_);
    has_forward_ = true;
    return h;
  }

  Matrix<S> Forward(const Matrix<S>& x, bool training) {
    return std::move(Forward(Batch<S>{x}, training)[0]);
  }

  /// Accumulates d loss / d params for the last Forward.
  void Backward(const Batch<S>& dy) {
    if (!has_forward_) throw Error("backward called before forward");
    Batch<S> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->Backward(g);
  }

  void ZeroGrad() { std::fill(params_.grads.begin(), params_.grads.end(), S(0)); }

  // Checkpoint: "CKPT", u64 spec hash, u64 step, u64 count, then count
  // little-endian f32 values (parameters, then buffers).

  void Save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path);
    const std::uint64_t hash = SpecHash(), step = params_.step, n = params_.values.size();
    out.write("CKPT", 4);
    out.write(reinterpret_cast<const char*>(&hash), 8);
    out.write(reinterpret_cast<const char*>(&step), 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    std::vector<float> buf(params_.values.begin(), params_.values.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw CheckpointError("failed writing checkpoint " + path);
  }

  void Load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path);
    char magic[4];
    std::uint64_t hash = 0, step = 0, n = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&hash), 8);
    in.read(reinterpret_cast<char*>(&step), 8);
    in.read(reinterpret_cast<char*>(&n), 8);
    if (!in || std::memcmp(magic, "CKPT", 4) != 0)
      throw CheckpointError(path + ": not a checkpoint");
    if (hash != SpecHash())
      throw CheckpointError(path + ": checkpoint was written for a different model");
    if (n != params_.values.size()) throw CheckpointError(path + ": parameter count mismatch");
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw CheckpointError(path + ": truncated checkpoint");
    std::copy(buf.begin(), buf.end(), params_.values.begin());
    params_.step = step;
  }

 private:
  static std::unique_ptr<Layer<S>> MakeLayer(const LayerSpec& s, std::size_t in) {
    switch (s.kind) {
      case LayerKind::kConv1d:
        return std::make_unique<Conv1d<S>>(in, s.size, s.kernel, s.stride, s.relu);
      case LayerKind::kBatchNorm: return std::make_unique<BatchNorm<S>>(in);
      case LayerKind::kDropout: return std::make_unique<Dropout<S>>(in, s.p);
      case LayerKind::kBiGru: return std::make_unique<BiGru<S>>(in, s.size);
      case LayerKind::kBiLstm: return std::make_unique<BiLstm<S>>(in, s.size);
      case LayerKind::kAffine: return std::make_unique<Affine<S>>(in, s.size);
      case LayerKind::kLogSoftmax: return std::make_unique<LogSoftmax<S>>(in);
      case LayerKind::kFrameStack: return std::make_unique<FrameStack<S>>(in, s.size);
    }
    throw Error("unknown layer kind");
  }

  ModelSpec spec_;
  std::size_t input_dim_;
  std::size_t output_dim_ = 0;
  ModelParams<S> params_;
  std::vector<std::unique_ptr<Layer<S>>> layers_;
  Rng dropout_rng_;
  bool has_forward_ = false;
};

}  // namespace ctckit::net
