// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "avsep/audio.h"

namespace avsep {

/// Windowed-sinc polyphase resampler (Kaiser window, ~60 dB stopband).
/// Returns the clip unchanged if rates already match.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace avsep
