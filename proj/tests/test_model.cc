// tests/test_model.cc
//
// Copyright 2026 The avwhisper Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avw/model.h"

#include <doctest.h>

#include <cmath>

#include "avw/util.h"
#include "testing.h"

using namespace avw;
using namespace avw::model;

namespace {

ModelConfig TinyConfig() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 2;
  c.ffn_mult = 2;
  c.max_text_len = 16;
  c.visual_dim = 8;
  c.n_mels = 8;
  c.vocab = BuildVocab({"abc"});
  return c;
}

Mat RandomMat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.Normal();
  return m;
}

bool BitwiseEqual(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("vocabulary carries specials up front") {
  const auto vocab = BuildVocab({"ba", "你"});
  REQUIRE(vocab.size() == 5 + 3);
  CHECK(vocab[0] == "<pad>");
  CHECK(vocab[1] == "<sot>");
  CHECK(vocab[2] == "<eot>");
  CHECK(vocab[3] == "<zh>");
  CHECK(vocab[4] == "<en>");
  CHECK(vocab[5] == "a");
  CHECK(vocab[6] == "b");
  CHECK(vocab[7] == "你");

  ModelConfig bad = TinyConfig();
  bad.vocab[0] = "<PAD>";
  CHECK_THROWS_AS(CreateModel(bad, 0), Error);
}

TEST_CASE("projection layer is the identity at initialization") {
  auto m = CreateModel(TinyConfig(), 7);
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat e = RandomMat(rng, rng.RangeInt(1, 12), m->config.d_model, 2.0);
    const Mat out = ProjectWhisper(*m, e);
    CHECK(BitwiseEqual(out, e));
  }
}

TEST_CASE("projection layer with hand-built parameters") {
  auto m = CreateModel(TinyConfig(), 7);
  const int d = m->config.d_model;
  m->params.Get("proj.w1")->value = Mat::Identity(d, d);
  m->params.Get("proj.b1")->value.setZero();
  m->params.Get("proj.w2")->value = Mat::Identity(d, d);
  m->params.Get("proj.b2")->value.setZero();

  SUBCASE("positive input doubles through the residual") {
    Mat v = Mat::Constant(3, d, 0.5);
    const Mat out = ProjectWhisper(*m, v);
    CHECK((out - 2.0 * v).norm() == doctest::Approx(0.0));
  }
  SUBCASE("negative input passes unchanged (dead ReLU)") {
    Mat v = Mat::Constant(3, d, -0.7);
    const Mat out = ProjectWhisper(*m, v);
    CHECK(BitwiseEqual(out, v));
  }
}

TEST_CASE("encoder halves the frame count and is deterministic") {
  auto m = CreateModel(TinyConfig(), 3);
  Rng rng(1);
  const Mat mel100 = RandomMat(rng, 100, m->config.n_mels);
  const Mat e1 = EncodeAudio(*m, mel100);
  CHECK(e1.rows() == 50);
  CHECK(e1.cols() == m->config.d_model);
  CHECK(EncodeAudio(*m, RandomMat(rng, 7, m->config.n_mels)).rows() == 4);
  const Mat e2 = EncodeAudio(*m, mel100);
  CHECK(BitwiseEqual(e1, e2));

  SUBCASE("too-short input is rejected") {
    const Mat tiny = RandomMat(rng, 1, m->config.n_mels);
    CHECK_THROWS_AS(EncodeAudio(*m, tiny), Error);
  }

  SUBCASE("whisper and normal branches share the encoder parameters") {
    const Mat before_normal = EncodeAudio(*m, mel100);
    const Mat before_whisper = ProjectWhisper(*m, EncodeAudio(*m, mel100));
    m->params.Get("enc.conv1.w")->value(0, 0) += 0.5;
    const Mat after_normal = EncodeAudio(*m, mel100);
    const Mat after_whisper = ProjectWhisper(*m, EncodeAudio(*m, mel100));
    CHECK_FALSE(BitwiseEqual(before_normal, after_normal));
    CHECK_FALSE(BitwiseEqual(before_whisper, after_whisper));
  }
}

TEST_CASE("visual embedder contracts") {
  auto m = CreateModel(TinyConfig(), 9);

  SUBCASE("absent video gives zero features") {
    const VisualFeatures v = AbsentVisual(*m);
    CHECK_FALSE(v.present);
    CHECK(v.frames.rows() == 1);
    CHECK(v.frames.norm() == 0.0);
  }

  SUBCASE("one embedding row per frame") {
    io::FrameStack crops;
    crops.n_frames = 25;
    crops.height = 96;
    crops.width = 96;
    crops.data.assign(25 * 96 * 96, 120.0);
    const VisualFeatures v = EmbedVisual(*m, crops);
    CHECK(v.present);
    CHECK(v.frames.rows() == 25);
    CHECK(v.frames.cols() == m->config.visual_dim);
  }

  SUBCASE("zero frames with the zero-initialized bias embed to zero") {
    io::FrameStack crops;
    crops.n_frames = 3;
    crops.height = 96;
    crops.width = 96;
    crops.data.assign(3 * 96 * 96, 0.0);
    const VisualFeatures v = EmbedVisual(*m, crops);
    CHECK(v.frames.norm() == 0.0);
  }

  SUBCASE("malformed frame size is rejected") {
    io::FrameStack crops;
    crops.n_frames = 1;
    crops.height = 48;
    crops.width = 96;
    crops.data.assign(48 * 96, 0.0);
    CHECK_THROWS_AS(EmbedVisual(*m, crops), Error);
  }
}

TEST_CASE("stage-2 model at init emits bitwise-identical logits") {
  avwtest::TempDir tmp("fusion");
  auto stage1 = CreateModel(TinyConfig(), 11);
  const std::string ckpt = tmp.str("s1.ckpt");
  SaveCheckpoint(*stage1, ckpt);
  auto stage2 = LoadCheckpoint(ckpt);
  AddFusionParams(*stage2, 777);

  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const Mat mel = RandomMat(rng, rng.RangeInt(4, 12), stage1->config.n_mels);
    const Mat enc = EncodeAudio(*stage1, mel);
    const std::vector<int> tokens = {kSotId, kLangZhId, 5, 6};
    VisualFeatures zeros = AbsentVisual(*stage2);
    VisualFeatures noisy;
    noisy.present = true;
    noisy.frames = RandomMat(rng, 9, stage2->config.visual_dim);

    const Mat base = DecodeLogits(*stage1, enc, zeros, tokens, false);
    const Mat fused_zeros = DecodeLogits(*stage2, enc, zeros, tokens, true);
    const Mat fused_noisy = DecodeLogits(*stage2, enc, noisy, tokens, true);
    CHECK(BitwiseEqual(base, fused_zeros));
    CHECK(BitwiseEqual(base, fused_noisy));
  }

  SUBCASE("nonzero gates react to the visual stream") {
    stage2->params.Get("gate.0.alpha")->value(0, 0) = 0.5;
    const Mat mel = RandomMat(rng, 6, stage1->config.n_mels);
    const Mat enc = EncodeAudio(*stage2, mel);
    const std::vector<int> tokens = {kSotId, kLangZhId, 5};
    VisualFeatures a;
    a.present = true;
    a.frames = RandomMat(rng, 4, stage2->config.visual_dim);
    VisualFeatures b;
    b.present = true;
    b.frames = RandomMat(rng, 4, stage2->config.visual_dim);
    const Mat la = DecodeLogits(*stage2, enc, a, tokens, true);
    const Mat lb = DecodeLogits(*stage2, enc, b, tokens, true);
    CHECK_FALSE(BitwiseEqual(la, lb));
  }
}

TEST_CASE("decoder causality: position j only affects logits at >= j") {
  auto m = CreateModel(TinyConfig(), 21);
  Rng rng(3);
  const Mat enc = EncodeAudio(*m, RandomMat(rng, 10, m->config.n_mels));
  std::vector<int> tokens = {kSotId, kLangZhId, 5, 6, 7, 5};
  const Mat base = DecodeLogits(*m, enc, AbsentVisual(*m), tokens, false);
  for (std::size_t j = 2; j < tokens.size(); ++j) {
    std::vector<int> perturbed = tokens;
    perturbed[j] = perturbed[j] == 5 ? 6 : 5;
    const Mat out = DecodeLogits(*m, enc, AbsentVisual(*m), perturbed, false);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(j); ++i)
      CHECK(BitwiseEqual(base.row(i), out.row(i)));
    CHECK_FALSE(BitwiseEqual(base.row(static_cast<Eigen::Index>(j)),
                             out.row(static_cast<Eigen::Index>(j))));
  }
}

TEST_CASE("decoder validates its token prefix") {
  auto m = CreateModel(TinyConfig(), 2);
  Rng rng(4);
  const Mat enc = EncodeAudio(*m, RandomMat(rng, 6, m->config.n_mels));
  const VisualFeatures v = AbsentVisual(*m);
  CHECK_THROWS_AS(DecodeLogits(*m, enc, v, {kSotId}, false), Error);
  CHECK_THROWS_AS(DecodeLogits(*m, enc, v, {kLangZhId, kSotId}, false), Error);
  CHECK_THROWS_WITH_AS(
      DecodeLogits(*m, enc, v, {kSotId, kLangZhId, 99}, false),
      doctest::Contains("out of vocab"), Error);
  std::vector<int> too_long(20, 5);
  too_long[0] = kSotId;
  too_long[1] = kLangZhId;
  CHECK_THROWS_WITH_AS(DecodeLogits(*m, enc, v, too_long, false),
                       doctest::Contains("max_text_len"), Error);
}

TEST_CASE("greedy transcription terminates and routes the projection") {
  auto m = CreateModel(TinyConfig(), 31);
  Rng rng(6);
  const Mat mel = RandomMat(rng, 12, m->config.n_mels);

  const Transcription t = GreedyTranscribe(*m, mel, AbsentVisual(*m),
                                           corpus::SpeechType::kNormal,
                                           corpus::Language::kZh, false);
  CHECK(static_cast<int>(t.token_ids.size()) <= m->config.max_text_len);
  CHECK(t.token_ids[0] == kSotId);
  CHECK(t.token_ids[1] == kLangZhId);

  SUBCASE("projection parameters are inert for normal speech") {
    Rng noise(77);
    // Give the projection a decidedly non-identity setting.
    m->params.Get("proj.w2")->value = RandomMat(noise, 16, 16, 0.7);
    m->params.Get("proj.b2")->value = RandomMat(noise, 1, 16, 0.7);
    const Mat enc = EncodeAudio(*m, mel);
    const Mat whisper_before = ProjectWhisper(*m, enc);
    const Transcription with = GreedyTranscribe(*m, mel, AbsentVisual(*m),
                                                corpus::SpeechType::kNormal,
                                                corpus::Language::kZh, false);
    m->params.Get("proj.w2")->value.setZero();
    m->params.Get("proj.b2")->value.setZero();
    const Transcription without = GreedyTranscribe(*m, mel, AbsentVisual(*m),
                                                   corpus::SpeechType::kNormal,
                                                   corpus::Language::kZh, false);
    CHECK(with.token_ids == without.token_ids);
    // The whisper route does depend on those parameters.
    CHECK_FALSE(BitwiseEqual(whisper_before, ProjectWhisper(*m, enc)));
  }

  SUBCASE("greedy output is invariant to positive logit scaling") {
    for (double scale : {0.25, 1.0, 3.0, 17.0}) {
      const Transcription scaled =
          GreedyTranscribe(*m, mel, AbsentVisual(*m),
                           corpus::SpeechType::kNormal, corpus::Language::kZh,
                           false, scale);
      CHECK(scaled.token_ids == t.token_ids);
    }
  }
}

TEST_CASE("checkpoints round trip across stages") {
  avwtest::TempDir tmp("ckpt");
  auto m = CreateModel(TinyConfig(), 123);
  AddFusionParams(*m, 456);
  m->params.Get("gate.1.alpha")->value(0, 0) = 0.25;
  const std::string path = tmp.str("model.ckpt");
  SaveCheckpoint(*m, path);

  auto back = LoadCheckpoint(path);
  CHECK(back->stage == 2);
  CHECK(back->seed == 123);
  CHECK(back->config.vocab == m->config.vocab);
  CHECK(ParamChecksum(*back) == ParamChecksum(*m));
  CHECK(ParamChecksum(*back, 1) == ParamChecksum(*m, 1));
  CHECK(ParamChecksum(*back, 2) == ParamChecksum(*m, 2));

  SUBCASE("corruption is detected") {
    auto bytes = io::ReadTextFile(path);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x10);
    io::WriteTextFile(path, bytes);
    CHECK_THROWS_AS(LoadCheckpoint(path), Error);
  }

  SUBCASE("missing file is an IO error") {
    CHECK_THROWS_AS(LoadCheckpoint(tmp.str("nope.ckpt")), Error);
  }
}

TEST_CASE("fusion params cannot be added twice") {
  auto m = CreateModel(TinyConfig(), 1);
  AddFusionParams(*m, 2);
  CHECK_THROWS_AS(AddFusionParams(*m, 3), Error);
}
