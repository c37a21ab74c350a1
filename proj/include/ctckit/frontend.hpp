// ctckit/frontend.hpp

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

// Feature extraction: power spectrogram, log-mel filterbank energies,
// regression deltas, per-utterance mean/variance normalization, and the
// speed/volume perturbations used for data augmentation.

#pragma once

#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ctckit/common.hpp"

namespace ctckit {

enum class FeatureKind { kFbank, kSpectrogram };
enum class Normalization { kNone, kCmn, kCmvn };

inline constexpr double kLogEnergyFloor = 1e-10;
inline constexpr double kStdFloor = 1e-8;

struct FeatureConfig {
  int sample_rate = 8000;
  double window_ms = 25.0;
  double shift_ms = 10.0;
  int n_mels = 40;
  FeatureKind kind = FeatureKind::kFbank;
  Normalization normalization = Normalization::kCmn;
  bool add_deltas = true;
  int delta_context = 2;

  int window_samples() const {
    return static_cast<int>(std::lround(sample_rate * window_ms / 1000.0));
  }
  int shift_samples() const {
    return static_cast<int>(std::lround(sample_rate * shift_ms / 1000.0));
  }
  int fft_size() const {
    int n = 1;
    while (n < window_samples()) n <<= 1;
    return n;
  }
  int num_bins() const { return fft_size() / 2 + 1; }

  /// Width of the final feature vector.
  int dim() const {
    int base = kind == FeatureKind::kFbank ? n_mels : num_bins();
    return add_deltas ? 3 * base : base;
  }

  void Validate() const {
    if (sample_rate <= 0) throw Error("FeatureConfig: sample_rate must be positive");
    if (!(shift_ms > 0)) throw Error("FeatureConfig: shift must be positive");
    if (window_ms < shift_ms) throw Error("FeatureConfig: window must be >= shift");
    if (shift_samples() < 1) throw Error("FeatureConfig: shift is below one sample");
    if (n_mels < 1) throw Error("FeatureConfig: n_mels must be >= 1");
    if (delta_context < 1) throw Error("FeatureConfig: delta_context must be >= 1");
  }

  std::string Describe() const {
    std::ostringstream os;
    os << "sr=" << sample_rate << ";win=" << window_ms << ";shift=" << shift_ms
       << ";mels=" << n_mels
       << ";kind=" << (kind == FeatureKind::kFbank ? "fbank" : "spectrogram")
       << ";norm=" << static_cast<int>(normalization) << ";deltas=" << add_deltas
       << ";ctx=" << delta_context;
    return os.str();
  }
  std::uint64_t Fingerprint() const { return Fnv1a(Describe()); }
};

struct FeatureMatrix {
  Matrix<double> data;
  double frame_shift_ms = 10.0;
  std::uint64_t fingerprint = 0;
};

/// Frames produced for n samples: 1 + floor((n - w) / s), zero when n < w.
inline std::size_t NumFrames(std::size_t n, std::size_t window, std::size_t shift) {
  if (n < window) return 0;
  return 1 + (n - window) / shift;
}

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void Fft(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = x[i + k];
        auto v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

/// Symmetric Hann window.
inline std::vector<double> HannWindow(int size) {
  std::vector<double> w(size, 1.0);
  if (size == 1) return w;
  for (int i = 0; i < size; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (size - 1));
  return w;
}

/// T x K power spectrogram, K = fft_size / 2 + 1.
inline Matrix<double> StftPower(std::span<const float> samples, const FeatureConfig& cfg) {
  cfg.Validate();
  const int win = cfg.window_samples();
  const int shift = cfg.shift_samples();
  const int nfft = cfg.fft_size();
  if (samples.size() < static_cast<std::size_t>(win))
    throw Error("signal shorter than one analysis window (" +
                std::to_string(samples.size()) + " < " + std::to_string(win) + " samples)");
  const std::size_t frames = NumFrames(samples.size(), win, shift);
  const auto window = HannWindow(win);
  Matrix<double> power(frames, nfft / 2 + 1);
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const std::size_t off = t * shift;
    for (int i = 0; i < win; ++i) buf[i] = samples[off + i] * window[i];
    Fft(buf);
    for (int k = 0; k <= nfft / 2; ++k) power(t, k) = std::norm(buf[k]);
  }
  return power;
}

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// n_mels x K triangular filter weights on the HTK mel scale spanning
/// [0, sample_rate / 2].
inline Matrix<double> MelFilterbank(const FeatureConfig& cfg) {
  const int k_bins = cfg.num_bins();
  const int m = cfg.n_mels;
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_hi = HzToMel(nyquist);
  std::vector<double> edges(m + 2);
  for (int i = 0; i < m + 2; ++i) edges[i] = MelToHz(mel_hi * i / (m + 1));
  Matrix<double> fb(m, k_bins);
  for (int j = 0; j < m; ++j) {
    const double lo = edges[j], mid = edges[j + 1], hi = edges[j + 2];
    double sum = 0;
    for (int k = 0; k < k_bins; ++k) {
      double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size();
      double w = 0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb(j, k) = w;
      sum += w;
    }
    if (sum <= 0)
      throw Error("mel filter " + std::to_string(j) +
                  " covers no FFT bin; reduce n_mels or enlarge the window");
  }
  return fb;
}

/// Natural-log mel energies with floor kLogEnergyFloor.
inline Matrix<double> Fbank(const Matrix<double>& power, const FeatureConfig& cfg) {
  const auto fb = MelFilterbank(cfg);
  if (power.cols() != fb.cols())
    throw Error("power spectrum width does not match the filterbank");
  Matrix<double> out(power.rows(), fb.rows());
  for (std::size_t t = 0; t < power.rows(); ++t) {
    auto p = power.row(t);
    for (std::size_t j = 0; j < fb.rows(); ++j) {
      auto w = fb.row(j);
      double e = 0;
      for (std::size_t k = 0; k < p.size(); ++k) e += w[k] * p[k];
      out(t, j) = std::log(std::max(e, kLogEnergyFloor));
    }
  }
  return out;
}

inline Matrix<double> LogSpectrogram(const Matrix<double>& power) {
  Matrix<double> out(power.rows(), power.cols());
  for (std::size_t i = 0; i < power.data().size(); ++i)
    out.data()[i] = std::log(std::max(power.data()[i], kLogEnergyFloor));
  return out;
}

namespace detail {

inline Matrix<double> RegressionDeltas(const Matrix<double>& c, int context) {
  const long T = static_cast<long>(c.rows());
  Matrix<double> d(c.rows(), c.cols());
  double denom = 0;
  for (int n = 1; n <= context; ++n) denom += 2.0 * n * n;
  for (long t = 0; t < T; ++t) {
    for (int n = 1; n <= context; ++n) {
      auto fwd = c.row(static_cast<std::size_t>(std::min(t + n, T - 1)));
      auto bwd = c.row(static_cast<std::size_t>(std::max(t - n, 0L)));
      for (std::size_t f = 0; f < c.cols(); ++f) d(t, f) += n * (fwd[f] - bwd[f]);
    }
    for (std::size_t f = 0; f < c.cols(); ++f) d(t, f) /= denom;
  }
  return d;
}

}  // namespace detail

/// [static, delta, delta-delta] with edge replication.
inline Matrix<double> AddDeltas(const Matrix<double>& feat, int context = 2) {
  if (feat.rows() == 0) throw Error("AddDeltas: empty feature matrix");
  const auto d1 = detail::RegressionDeltas(feat, context);
  const auto d2 = detail::RegressionDeltas(d1, context);
  const std::size_t F = feat.cols();
  Matrix<double> out(feat.rows(), 3 * F);
  for (std::size_t t = 0; t < feat.rows(); ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      out(t, f) = feat(t, f);
      out(t, F + f) = d1(t, f);
      out(t, 2 * F + f) = d2(t, f);
    }
  }
  return out;
}

/// Per-utterance mean (and optionally variance) normalization.
inline Matrix<double> Normalize(const Matrix<double>& feat, Normalization mode) {
  if (mode == Normalization::kNone) return feat;
  if (feat.rows() == 0) throw Error("Normalize: empty feature matrix");
  const std::size_t T = feat.rows(), F = feat.cols();
  Matrix<double> out = feat;
  for (std::size_t f = 0; f < F; ++f) {
    double mean = 0;
    for (std::size_t t = 0; t < T; ++t) mean += feat(t, f);
    mean /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) out(t, f) -= mean;
    // second pass removes the rounding residue of the first
    double resid = 0;
    for (std::size_t t = 0; t < T; ++t) resid += out(t, f);
    resid /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) out(t, f) -= resid;
    if (mode == Normalization::kCmvn) {
      double var = 0;
      for (std::size_t t = 0; t < T; ++t) var += out(t, f) * out(t, f);
      var /= static_cast<double>(T);
      double sd = std::sqrt(var);
      if (sd < kStdFloor) {
        for (std::size_t t = 0; t < T; ++t) out(t, f) = 0.0;
      } else {
        for (std::size_t t = 0; t < T; ++t) out(t, f) /= sd;
      }
    }
  }
  return out;
}

/// Full pipeline: power spectrum, log-mel or log-spectrogram statics,
/// normalization of the statics, then deltas.
inline FeatureMatrix ComputeFeatures(std::span<const float> samples, const FeatureConfig& cfg) {
  auto power = StftPower(samples, cfg);
  Matrix<double> statics =
      cfg.kind == FeatureKind::kFbank ? Fbank(power, cfg) : LogSpectrogram(power);
  statics = Normalize(statics, cfg.normalization);
  FeatureMatrix fm;
  fm.data = cfg.add_deltas ? AddDeltas(statics, cfg.delta_context) : std::move(statics);
  fm.frame_shift_ms = cfg.shift_ms;
  fm.fingerprint = cfg.Fingerprint();
  return fm;
}

/// Resamples by `factor` with linear interpolation; output length is
/// round(n / factor).
inline std::vector<float> SpeedPerturb(std::span<const float> samples, double factor) {
  if (!(factor >= 0.8 && factor <= 1.25))
    throw Error("speed factor " + std::to_string(factor) + " outside [0.8, 1.25]");
  const std::size_t n = samples.size();
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / factor));
  std::vector<float> out(m);
  if (n == 0) return out;
  for (std::size_t i = 0; i < m; ++i) {
    double pos = static_cast<double>(i) * factor;
    auto lo = static_cast<std::size_t>(pos);
    if (lo >= n - 1) {
      out[i] = samples[n - 1];
      continue;
    }
    double frac = pos - static_cast<double>(lo);
    out[i] = static_cast<float>((1.0 - frac) * samples[lo] + frac * samples[lo + 1]);
  }
  return out;
}

/// Scales by 10^(gain_db/20) and clips to the int16 range.
inline std::vector<float> VolumePerturb(std::span<const float> samples, double gain_db) {
  if (!(gain_db >= -10.0 && gain_db <= 10.0))
    throw Error("volume gain " + std::to_string(gain_db) + " dB outside [-10, 10]");
  const double g = std::pow(10.0, gain_db / 20.0);
  std::vector<float> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out[i] = static_cast<float>(std::clamp(samples[i] * g, -32768.0, 32767.0));
  return out;
}

// Feature dump: "FTRM", u32 T, u32 F, f32 frame_shift_ms, then T*F f32
// row-major, all little-endian.

inline void WriteFeatures(const std::string& path, const FeatureMatrix& fm) {
  std::string s = "FTRM";
  auto put = [&s](const void* p, std::size_t n) {
    // little-endian host assumed; checked in the test suite
    s.append(static_cast<const char*>(p), n);
  };
  std::uint32_t t = static_cast<std::uint32_t>(fm.data.rows());
  std::uint32_t f = static_cast<std::uint32_t>(fm.data.cols());
  float shift = static_cast<float>(fm.frame_shift_ms);
  put(&t, 4);
  put(&f, 4);
  put(&shift, 4);
  for (double v : fm.data.data()) {
    float x = static_cast<float>(v);
    put(&x, 4);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline FeatureMatrix ReadFeatures(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || bytes.compare(0, 4, "FTRM") != 0)
    throw Error(path + ": not a feature dump");
  std::uint32_t t, f;
  float shift;
  std::memcpy(&t, bytes.data() + 4, 4);
  std::memcpy(&f, bytes.data() + 8, 4);
  std::memcpy(&shift, bytes.data() + 12, 4);
  if (bytes.size() != 16 + 4ull * t * f) throw Error(path + ": truncated feature dump");
  FeatureMatrix fm;
  fm.frame_shift_ms = shift;
  fm.data = Matrix<double>(t, f);
  for (std::size_t i = 0; i < std::size_t(t) * f; ++i) {
    float x;
    std::memcpy(&x, bytes.data() + 16 + 4 * i, 4);
    fm.data.data()[i] = x;
  }
  return fm;
}

}  // namespace ctckit
