// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <initializer_list>

#include "avsep/error.h"
#include "avsep/stft.h"
#include "json.hpp"

namespace avsep::detail {

// Strict object parsing: misspelled keys fail loudly instead of silently
// falling back to defaults.
inline void expect_keys(const nlohmann::json& j,
                        std::initializer_list<const char*> allowed, const char* ctx) {
  AVSEP_CHECK(j.is_object(), "config: " << ctx << " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    AVSEP_CHECK(ok, "config: unknown key '" << key << "' in " << ctx);
  }
}

inline nlohmann::json stft_to_json(const StftParams& p) {
  return nlohmann::json{
      {"fft_size", p.fft_size}, {"hop", p.hop}, {"sample_rate", p.sample_rate}};
}

inline StftParams stft_from_json(const nlohmann::json& j, const char* ctx) {
  expect_keys(j, {"fft_size", "hop", "sample_rate"}, ctx);
  StftParams p;
  p.fft_size = j.value("fft_size", p.fft_size);
  p.hop = j.value("hop", p.hop);
  p.sample_rate = j.value("sample_rate", p.sample_rate);
  return p;
}

}  // namespace avsep::detail
