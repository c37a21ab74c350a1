// ctckit/wav.hpp

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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ctckit/common.hpp"

namespace ctckit {

/// Mono 16-bit PCM audio. Samples are stored in int16 units as floats.
struct Wave {
  int sample_rate = 0;
  std::vector<float> samples;
};

namespace detail {

inline std::uint32_t ReadU32(const char* p) {
  const auto* b = reinterpret_cast<const unsigned char*>(p);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}
inline std::uint16_t ReadU16(const char* p) {
  const auto* b = reinterpret_cast<const unsigned char*>(p);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
inline void PutU32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void PutU16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

inline Wave ParseWav(const std::string& bytes) {
  using detail::ReadU16;
  using detail::ReadU32;
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0)
    throw Error("not a RIFF/WAVE file");
  Wave w;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string id = bytes.substr(pos, 4);
    std::uint32_t size = ReadU32(bytes.data() + pos + 4);
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw Error("truncated WAV chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw Error("short fmt chunk");
      std::uint16_t format = ReadU16(bytes.data() + body);
      std::uint16_t channels = ReadU16(bytes.data() + body + 2);
      w.sample_rate = static_cast<int>(ReadU32(bytes.data() + body + 4));
      std::uint16_t bits = ReadU16(bytes.data() + body + 14);
      if (format != 1) throw Error("WAV is not PCM");
      if (channels != 1) throw Error("WAV is not mono");
      if (bits != 16) throw Error("WAV is not 16-bit");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error("WAV data chunk before fmt chunk");
      std::size_t n = size / 2;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = static_cast<std::int16_t>(ReadU16(bytes.data() + body + 2 * i));
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw Error("WAV has no data chunk");
}

inline Wave ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return ParseWav(bytes);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// Samples are rounded and clipped to the int16 range.
inline void WriteWav(const std::string& path, const Wave& w) {
  using detail::PutU16;
  using detail::PutU32;
  std::string s;
  std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  s += "RIFF";
  PutU32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  PutU32(s, 16);
  PutU16(s, 1);
  PutU16(s, 1);
  PutU32(s, static_cast<std::uint32_t>(w.sample_rate));
  PutU32(s, static_cast<std::uint32_t>(w.sample_rate * 2));
  PutU16(s, 2);
  PutU16(s, 16);
  s += "data";
  PutU32(s, data_bytes);
  for (float x : w.samples) {
    double v = std::clamp(std::round(static_cast<double>(x)), -32768.0, 32767.0);
    PutU16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace ctckit
