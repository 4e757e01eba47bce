// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "avsep/error.h"

namespace avsep {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

float bits_to_float(std::uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

std::uint32_t float_to_bits(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  return bits;
}

}  // namespace

AudioClip read_wav(const std::string& path, bool take_channel0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);

  char riff[4], wave[4];
  in.read(riff, 4);
  read_le<std::uint32_t>(in);  // riff size
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  while (in) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    const std::uint32_t size = read_le<std::uint32_t>(in);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      sample_rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      if (format == kFormatExtensible) {
        // SubFormat GUID's first two bytes carry the real format tag; we only
        // rewound past it above, so re-read is not possible. Treat as PCM/float
        // by bit depth.
        format = (bits == 32) ? kFormatFloat : kFormatPcm;
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }

  if (!have_fmt || data.empty()) throw IoError("malformed WAV (missing fmt/data): " + path);
  AVSEP_CHECK(channels >= 1, "WAV has zero channels: " << path);
  if (channels > 1 && !take_channel0) {
    throw ValidationError("multichannel WAV not supported (pass take_channel0): " + path);
  }

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n = data.size() / frame_bytes;
  clip.samples.resize(n);

  if (format == kFormatPcm && bits == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t v;
      std::memcpy(&v, data.data() + i * frame_bytes, 2);
      clip.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t raw;
      std::memcpy(&raw, data.data() + i * frame_bytes, 4);
      clip.samples[i] = static_cast<double>(bits_to_float(raw));
    }
  } else {
    throw IoError("unsupported WAV encoding (need PCM16 or float32): " + path);
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip, WavEncoding encoding) {
  AVSEP_CHECK(clip.sample_rate > 0, "write_wav: invalid sample rate");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create WAV file: " + path);

  const std::uint16_t channels = 1;
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, format);
  write_le<std::uint16_t>(out, channels);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate * channels * (bits / 8)));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_size);

  if (encoding == WavEncoding::kPcm16) {
    for (double s : clip.samples) {
      const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lrint(clamped * 32768.0)));
    }
  } else {
    for (double s : clip.samples) {
      write_le<std::uint32_t>(out, float_to_bits(static_cast<float>(s)));
    }
  }
  if (!out) throw IoError("failed writing WAV file: " + path);
}

}  // namespace avsep
