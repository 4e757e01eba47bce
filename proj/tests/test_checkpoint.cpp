// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/checkpoint.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "avsep/dereverb.h"
#include "avsep/error.h"
#include "avsep/rng.h"
#include "avsep/separator.h"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

using avsep::AudioClip;
using avsep::CheckpointInfo;
using avsep::Dereverb;
using avsep::DereverbConfig;
using avsep::ParamStore;
using avsep::Rng;
using avsep::Separator;
using avsep::SeparatorConfig;

namespace {

fs::path fresh_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DereverbConfig small_derev() {
  DereverbConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 2;
  cfg.stft.fft_size = 64;
  cfg.stft.hop = 32;
  cfg.stft.sample_rate = 8000;
  return cfg;
}

SeparatorConfig small_sep() {
  SeparatorConfig cfg;
  cfg.k_blocks = 2;
  cfg.channels = 4;
  cfg.visual_channels = 2;
  cfg.block_hidden = 3;
  cfg.d_lip = 4;
  cfg.d_expr = 1;
  cfg.stft.fft_size = 64;
  cfg.stft.hop = 32;
  cfg.stft.sample_rate = 8000;
  return cfg;
}

// Fake a training history so moment buffers and the step count are nonzero.
void churn(ParamStore& params, Rng& rng, int steps) {
  for (int s = 0; s < steps; ++s) {
    for (const std::string& name : params.names())
      for (double& g : params.grad_at(name).data) g = 0.1 * rng.normal();
    params.adam_step(1e-3);
    params.zero_grad();
  }
}

AudioClip random_clip(Rng& rng, int len, int sr) {
  std::vector<double> s(len);
  for (double& v : s) v = 0.3 * rng.normal();
  return AudioClip(s, sr);
}

}  // namespace

TEST_CASE("checkpoint round trip restores weights, moments, and step count exactly") {
  const fs::path dir = fresh_dir("avsep_ckpt_rt");
  DereverbConfig cfg = small_derev();
  Dereverb src(cfg, 11);
  Rng rng(7);
  churn(src.params(), rng, 3);
  const std::string path = (dir / "model.ckpt").string();
  avsep::save_checkpoint(path, "dereverb", "{\"depth\":2}", src.params(),
                         "{\"epoch\":5}");

  Dereverb dst(cfg, 999);  // different seed: weights start different
  REQUIRE(dst.params().content_hash() != src.params().content_hash());
  CheckpointInfo info = avsep::load_checkpoint(path, "dereverb", dst.params());
  CHECK(info.kind == "dereverb");
  CHECK(nlohmann::json::parse(info.extra_json).at("epoch") == 5);
  CHECK(info.adam_steps == 3);
  CHECK(dst.params().content_hash() == src.params().content_hash());
  CHECK(dst.params().adam_steps() == src.params().adam_steps());
  for (const std::string& name : src.params().names()) {
    CHECK(dst.params().adam_m(name).data == src.params().adam_m(name).data);
    CHECK(dst.params().adam_v(name).data == src.params().adam_v(name).data);
  }

  // Forward passes agree bit for bit.
  AudioClip in = random_clip(rng, 640, cfg.stft.sample_rate);
  CHECK(src.forward(in).samples == dst.forward(in).samples);

  // One more identical optimizer step keeps the two stores in lockstep,
  // proving the moments and bias-correction step were restored exactly.
  Rng ga(13), gb(13);
  churn(src.params(), ga, 1);
  churn(dst.params(), gb, 1);
  CHECK(dst.params().content_hash() == src.params().content_hash());
}

TEST_CASE("peek reads header without loading") {
  const fs::path dir = fresh_dir("avsep_ckpt_peek");
  SeparatorConfig cfg = small_sep();
  Separator model(cfg, 3);
  const std::string path = (dir / "sep.ckpt").string();
  avsep::save_checkpoint(path, "separator", "{\"k_blocks\":2}", model.params(),
                         "{\"note\":\"best\"}");
  CheckpointInfo info = avsep::peek_checkpoint(path);
  CHECK(info.kind == "separator");
  CHECK(nlohmann::json::parse(info.config_json).at("k_blocks") == 2);
  CHECK(nlohmann::json::parse(info.extra_json).at("note") == "best");
  CHECK(info.has_optimizer);
  CHECK(info.tensor_names == model.params().names());
}

TEST_CASE("loading a checkpoint of the wrong kind is rejected") {
  const fs::path dir = fresh_dir("avsep_ckpt_kind");
  DereverbConfig dcfg = small_derev();
  Dereverb derev(dcfg, 1);
  const std::string path = (dir / "derev.ckpt").string();
  avsep::save_checkpoint(path, "dereverb", "{}", derev.params());

  SeparatorConfig scfg = small_sep();
  Separator sep(scfg, 2);
  CHECK_THROWS_WITH_AS(avsep::load_checkpoint(path, "separator", sep.params()),
                       doctest::Contains("holds a dereverb model"),
                       avsep::ValidationError);
}

TEST_CASE("shape mismatches and unknown tensors are rejected") {
  const fs::path dir = fresh_dir("avsep_ckpt_shape");
  DereverbConfig a = small_derev();
  Dereverb src(a, 1);
  const std::string path = (dir / "a.ckpt").string();
  avsep::save_checkpoint(path, "dereverb", "{}", src.params());

  DereverbConfig wide = a;
  wide.base_channels = 3;  // same tensor names, different shapes
  Dereverb dst_wide(wide, 2);
  CHECK_THROWS_WITH_AS(avsep::load_checkpoint(path, "dereverb", dst_wide.params()),
                       doctest::Contains("shape mismatch"), avsep::ValidationError);

  DereverbConfig deep = a;
  deep.depth = 3;  // file lacks enc2/dec2: fewer tensors than the model registers
  Dereverb dst_deep(deep, 2);
  CHECK_THROWS_AS(avsep::load_checkpoint(path, "dereverb", dst_deep.params()),
                  avsep::ValidationError);
}

TEST_CASE("f32 blobs load with float precision") {
  const fs::path dir = fresh_dir("avsep_ckpt_f32");
  DereverbConfig cfg = small_derev();
  Dereverb src(cfg, 21);
  const std::string path = (dir / "f32.ckpt").string();
  avsep::save_checkpoint(path, "dereverb", "{}", src.params(), "{}", true, "f32");
  Dereverb dst(cfg, 22);
  avsep::load_checkpoint(path, "dereverb", dst.params());
  for (const std::string& name : src.params().names()) {
    const auto& a = src.params().at(name).data;
    const auto& b = dst.params().at(name).data;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-6));
      CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
    }
  }
}

TEST_CASE("weights-only checkpoints reset the optimizer on load") {
  const fs::path dir = fresh_dir("avsep_ckpt_noopt");
  DereverbConfig cfg = small_derev();
  Dereverb src(cfg, 4);
  Rng rng(9);
  churn(src.params(), rng, 2);
  const std::string path = (dir / "w.ckpt").string();
  avsep::save_checkpoint(path, "dereverb", "{}", src.params(), "{}", false);

  Dereverb dst(cfg, 5);
  churn(dst.params(), rng, 2);  // dirty moments that the load must clear
  CheckpointInfo info = avsep::load_checkpoint(path, "dereverb", dst.params());
  CHECK_FALSE(info.has_optimizer);
  CHECK(dst.params().adam_steps() == 0);
  CHECK(dst.params().content_hash() == src.params().content_hash());
  for (const std::string& name : dst.params().names()) {
    for (double v : dst.params().adam_m(name).data) CHECK(v == 0.0);
    for (double v : dst.params().adam_v(name).data) CHECK(v == 0.0);
  }
}

TEST_CASE("corrupt checkpoint files are reported") {
  const fs::path dir = fresh_dir("avsep_ckpt_corrupt");
  DereverbConfig cfg = small_derev();
  Dereverb src(cfg, 8);
  const std::string path = (dir / "c.ckpt").string();
  avsep::save_checkpoint(path, "dereverb", "{}", src.params());

  SUBCASE("missing file") {
    CHECK_THROWS_AS(avsep::peek_checkpoint((dir / "absent.ckpt").string()),
                    avsep::IoError);
  }
  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("NOPE", 4);
    f.close();
    Dereverb dst(cfg, 9);
    CHECK_THROWS_WITH_AS(avsep::load_checkpoint(path, "dereverb", dst.params()),
                         doctest::Contains("bad magic"), avsep::ValidationError);
  }
  SUBCASE("truncated blob") {
    const auto full = fs::file_size(path);
    fs::resize_file(path, full - 64);
    Dereverb dst(cfg, 9);
    CHECK_THROWS_WITH_AS(avsep::load_checkpoint(path, "dereverb", dst.params()),
                         doctest::Contains("truncated blob"), avsep::ValidationError);
  }
  SUBCASE("invalid config json on save") {
    CHECK_THROWS_AS(
        avsep::save_checkpoint((dir / "x.ckpt").string(), "dereverb", "{oops",
                               src.params()),
        avsep::ValidationError);
  }
}
