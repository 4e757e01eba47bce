// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "avsep/audio.h"

namespace avsep {

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a mono WAV file (PCM 16-bit or IEEE float 32-bit).
/// Multichannel input is an error unless take_channel0 is set, in which case
/// channel 0 is extracted.
AudioClip read_wav(const std::string& path, bool take_channel0 = false);

/// Writes a mono WAV file. Float32 by default; PCM16 clamps to [-1, 1).
void write_wav(const std::string& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace avsep
