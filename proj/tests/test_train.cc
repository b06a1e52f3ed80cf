// tests/test_train.cc
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

#include "avw/train.h"

#include <doctest.h>

#include <cmath>
#include <set>

#include "avw/features.h"
#include "avw/synth.h"
#include "avw/util.h"
#include "testing.h"

using namespace avw;
using namespace avw::train;
using avw::model::Mat;

namespace {

model::ModelConfig TinyConfig() {
  model::ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.ffn_mult = 2;
  c.max_text_len = 16;
  c.visual_dim = 8;
  c.n_mels = 8;
  c.vocab = model::BuildVocab({"abcdef"});
  return c;
}

Mat RandomMat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.Normal();
  return m;
}

UttTensors MakeUtt(const model::Model& m, Rng& rng, corpus::SpeechType type,
                   const std::string& text, int mel_frames = 8) {
  UttTensors t;
  t.speech_type = type;
  t.mel = RandomMat(rng, mel_frames, m.config.n_mels);
  const auto chars = m.EncodeText(text);
  t.tokens = {model::kSotId, model::kLangZhId};
  t.tokens.insert(t.tokens.end(), chars.begin(), chars.end());
  t.targets.assign(t.tokens.begin() + 1, t.tokens.end());
  t.targets.push_back(model::kEotId);
  t.visual = model::AbsentVisual(m);
  return t;
}

}  // namespace

TEST_CASE("identical pair members at init give L_w == L_n exactly") {
  auto m = model::CreateModel(TinyConfig(), 5);
  Rng rng(1);
  BatchItem item;
  item.whisper = MakeUtt(*m, rng, corpus::SpeechType::kWhisper, "abc");
  item.normal = *item.whisper;  // byte-identical tensors
  item.normal->speech_type = corpus::SpeechType::kNormal;
  const LossBreakdown loss = BatchLoss(*m, {item}, 1);
  CHECK(loss.l_w == loss.l_n);
  CHECK(loss.l_total == loss.l_w + loss.l_n);
}

TEST_CASE("single unpaired normal utterance trains only its branch") {
  auto m = model::CreateModel(TinyConfig(), 5);
  Rng rng(2);
  BatchItem item;
  item.normal = MakeUtt(*m, rng, corpus::SpeechType::kNormal, "fed");
  const LossBreakdown loss = BatchLoss(*m, {item}, 1);
  CHECK(loss.l_w == 0.0);
  CHECK(loss.l_total == loss.l_n);
}

TEST_CASE("empty batch is rejected") {
  auto m = model::CreateModel(TinyConfig(), 5);
  CHECK_THROWS_AS(BatchLoss(*m, {}, 1), Error);
}

TEST_CASE("Eq-3 additivity holds over random batches") {
  auto m = model::CreateModel(TinyConfig(), 9);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BatchItem> batch;
    const int n = rng.RangeInt(1, 4);
    for (int i = 0; i < n; ++i) {
      BatchItem item;
      if (rng.Uniform() < 0.8)
        item.whisper = MakeUtt(*m, rng, corpus::SpeechType::kWhisper, "abd",
                               rng.RangeInt(4, 10));
      if (rng.Uniform() < 0.8 || !item.whisper)
        item.normal = MakeUtt(*m, rng, corpus::SpeechType::kNormal, "cafe",
                              rng.RangeInt(4, 10));
      batch.push_back(std::move(item));
    }
    const LossBreakdown loss = BatchLoss(*m, batch, 1);
    CHECK(std::abs(loss.l_total - (loss.l_w + loss.l_n)) <=
          1e-6 * std::max(1.0, std::abs(loss.l_total)));
  }
}

TEST_CASE("appending PAD tokens leaves every loss term unchanged") {
  auto m = model::CreateModel(TinyConfig(), 9);
  Rng rng(4);
  BatchItem item;
  item.whisper = MakeUtt(*m, rng, corpus::SpeechType::kWhisper, "bead");
  item.normal = MakeUtt(*m, rng, corpus::SpeechType::kNormal, "face");
  const LossBreakdown base = BatchLoss(*m, {item}, 1);

  BatchItem padded = item;
  for (int k = 0; k < 3; ++k) {
    padded.whisper->tokens.push_back(model::kPadId);
    padded.whisper->targets.push_back(model::kPadId);
    padded.normal->tokens.push_back(model::kPadId);
    padded.normal->targets.push_back(model::kPadId);
  }
  const LossBreakdown with_pad = BatchLoss(*m, {padded}, 1);
  CHECK(with_pad.l_w == base.l_w);
  CHECK(with_pad.l_n == base.l_n);
  CHECK(with_pad.l_total == base.l_total);
}

TEST_CASE("stage partition labels cover all parameters disjointly") {
  auto m = model::CreateModel(TinyConfig(), 9);
  model::AddFusionParams(*m, 10);
  std::size_t stage1 = 0, stage2 = 0;
  for (const auto* p : m->params.All()) {
    REQUIRE((p->stage == 1 || p->stage == 2));
    if (p->stage == 1) ++stage1;
    else ++stage2;
    const bool is_gate = p->name.rfind("gate.", 0) == 0;
    CHECK(is_gate == (p->stage == 2));
  }
  CHECK(stage1 > 0);
  CHECK(stage2 > 0);
  CHECK(stage1 + stage2 == m->params.All().size());
}

TEST_CASE("shared-encoder gradient equals the sum of branch gradients") {
  auto m = model::CreateModel(TinyConfig(), 17);
  Rng rng(5);
  BatchItem item;
  item.whisper = MakeUtt(*m, rng, corpus::SpeechType::kWhisper, "dec");
  item.normal = MakeUtt(*m, rng, corpus::SpeechType::kNormal, "fab");

  Tape tape;
  const BatchGraph g = BuildBatchLoss(tape, *m, {item}, 1);

  m->params.ZeroGrads();
  tape.Backward(g.l_total);
  std::vector<Mat> total_grads;
  for (const auto* p : m->params.All()) total_grads.push_back(p->grad);

  m->params.ZeroGrads();
  tape.Backward(g.l_w);
  std::vector<Mat> w_grads;
  for (const auto* p : m->params.All()) w_grads.push_back(p->grad);

  m->params.ZeroGrads();
  tape.Backward(g.l_n);
  std::vector<Mat> n_grads;
  for (const auto* p : m->params.All()) n_grads.push_back(p->grad);

  for (std::size_t i = 0; i < total_grads.size(); ++i) {
    const double scale = std::max(1.0, total_grads[i].norm());
    CHECK((total_grads[i] - (w_grads[i] + n_grads[i])).norm() / scale < 1e-12);
  }
}

TEST_CASE("overfitting a single pair drives the loss down") {
  auto m = model::CreateModel(TinyConfig(), 23);
  Rng rng(6);
  BatchItem item;
  item.whisper = MakeUtt(*m, rng, corpus::SpeechType::kWhisper, "cab");
  item.normal = MakeUtt(*m, rng, corpus::SpeechType::kNormal, "cab");

  AdamOptimizer opt(m->params.OfStage(1), 1e-3, /*grad_clip=*/0.0, 0);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    m->params.ZeroGrads();
    Tape tape;
    const BatchGraph g = BuildBatchLoss(tape, *m, {item}, 1);
    tape.Backward(g.l_total);
    opt.Step();
    const double loss = tape.value(g.l_total)(0, 0);
    if (step == 0) first = loss;
    last = loss;
  }
  CHECK(last < first);
  CHECK(last < 0.9 * first);
}

TEST_CASE("synthetic corpus: determinism, pairing and voicing") {
  avwtest::TempDir tmp("synth");
  synth::SynthOptions opts;
  opts.n_speakers = 3;
  opts.n_utts = 3;
  opts.seed = 7;
  opts.out_dir = tmp.str("c1");
  const corpus::PairedManifest m1 = synth::MakeSyntheticCorpus(opts);
  opts.out_dir = tmp.str("c2");
  const corpus::PairedManifest m2 = synth::MakeSyntheticCorpus(opts);

  REQUIRE(m1.records.size() == 18);

  SUBCASE("same seed reproduces the corpus exactly") {
    REQUIRE(m1.records.size() == m2.records.size());
    for (std::size_t i = 0; i < m1.records.size(); ++i) {
      CHECK(m1.records[i].utt_id == m2.records[i].utt_id);
      CHECK(m1.records[i].text == m2.records[i].text);
      CHECK(m1.records[i].duration_s == m2.records[i].duration_s);
    }
    const auto a = io::ReadWav(m1.records[0].audio_path);
    const auto b = io::ReadWav(m2.records[0].audio_path);
    CHECK(a.samples == b.samples);
  }

  SUBCASE("pairing recovers the true counterpart with similarity 1") {
    const corpus::PairedManifest paired = corpus::PairUtterances(m1);
    CHECK(paired.pairs.size() == 9);
    CHECK(paired.unpaired.empty());
    for (const auto& p : paired.pairs) {
      CHECK(p.similarity == 1.0);
      // counterpart swaps the _w suffix for _n
      std::string expect = p.whisper;
      expect.back() = 'n';
      CHECK(p.normal == expect);
    }
  }

  SUBCASE("speaker 3k+3 pattern leaves some records audio-only") {
    bool any_video = false, any_plain = false;
    for (const auto& r : m1.records) {
      if (r.has_video()) any_video = true;
      else any_plain = true;
    }
    CHECK(any_video);
    // 3 speakers: spk00, spk01, spk02 all have video (only s%4==3 skips);
    // use a larger corpus to see both groups.
    synth::SynthOptions big = opts;
    big.n_speakers = 4;
    big.out_dir = tmp.str("c3");
    const auto m4 = synth::MakeSyntheticCorpus(big);
    any_plain = false;
    for (const auto& r : m4.records)
      if (!r.has_video()) any_plain = true;
    CHECK(any_plain);
  }

  SUBCASE("normal speech is voiced, whisper speech is not") {
    // Normalized autocorrelation peak over pitch lags 80..450 Hz.
    auto voiced_frames = [](const std::vector<double>& x) {
      const int frame = 640, hop = 320;
      const int lag_lo = 16000 / 450, lag_hi = 16000 / 80;
      int hits = 0;
      for (std::size_t start = 0; start + frame + lag_hi < x.size();
           start += hop) {
        double energy = 0.0;
        for (int i = 0; i < frame; ++i)
          energy += x[start + i] * x[start + i];
        if (energy < 1e-3) continue;
        double best = 0.0;
        for (int lag = lag_lo; lag <= lag_hi; ++lag) {
          double num = 0.0, den2 = 0.0;
          for (int i = 0; i < frame; ++i) {
            num += x[start + i] * x[start + i + lag];
            den2 += x[start + i + lag] * x[start + i + lag];
          }
          const double denom = std::sqrt(energy * den2) + 1e-12;
          best = std::max(best, num / denom);
        }
        if (best > 0.6) ++hits;
      }
      return hits;
    };
    int whisper_hits = 0, normal_hits = 0;
    for (const auto& r : m1.records) {
      const auto wav = io::ReadWav(r.audio_path);
      if (r.speech_type == corpus::SpeechType::kWhisper)
        whisper_hits += voiced_frames(wav.samples);
      else
        normal_hits += voiced_frames(wav.samples);
    }
    CHECK(whisper_hits == 0);
    CHECK(normal_hits > 0);
  }
}

TEST_CASE("stage-1 training is deterministic and leaves no gates behind") {
  avwtest::TempDir tmp("train1");
  synth::SynthOptions opts;
  opts.n_speakers = 2;
  opts.n_utts = 2;
  opts.seed = 3;
  opts.out_dir = tmp.str("corpus");
  corpus::PairedManifest manifest =
      corpus::PairUtterances(synth::MakeSyntheticCorpus(opts));

  std::vector<std::string> texts;
  for (const auto& r : manifest.records) texts.push_back(r.text);
  model::ModelConfig cfg = TinyConfig();
  cfg.vocab = model::BuildVocab(texts);
  cfg.n_mels = 16;

  TrainConfig tc;
  tc.stage = 1;
  tc.epochs = 1;
  tc.batch_pairs = 2;
  tc.lr = 1e-3;
  tc.seed = 42;

  auto m1 = model::CreateModel(cfg, 42);
  const auto curve1 = TrainStage1(*m1, manifest, tc, "");
  auto m2 = model::CreateModel(cfg, 42);
  const auto curve2 = TrainStage1(*m2, manifest, tc, "");

  CHECK(model::ParamChecksum(*m1) == model::ParamChecksum(*m2));
  REQUIRE(curve1.size() == curve2.size());
  for (std::size_t i = 0; i < curve1.size(); ++i)
    CHECK(curve1[i].loss.l_total == curve2[i].loss.l_total);
  // Stage 1 has no gate parameters at all.
  for (const auto* p : m1->params.All())
    CHECK(p->name.rfind("gate.", 0) != 0);
}

TEST_CASE("stage-2 training changes only the fusion parameters") {
  avwtest::TempDir tmp("train2");
  synth::SynthOptions opts;
  opts.n_speakers = 2;
  opts.n_utts = 2;
  opts.seed = 11;
  opts.out_dir = tmp.str("corpus");
  corpus::PairedManifest manifest =
      corpus::PairUtterances(synth::MakeSyntheticCorpus(opts));

  std::vector<std::string> texts;
  for (const auto& r : manifest.records) texts.push_back(r.text);
  model::ModelConfig cfg = TinyConfig();
  cfg.vocab = model::BuildVocab(texts);
  cfg.n_mels = 16;

  auto m = model::CreateModel(cfg, 1);
  TrainConfig tc1;
  tc1.stage = 1;
  tc1.epochs = 1;
  tc1.batch_pairs = 2;
  tc1.seed = 5;
  TrainStage1(*m, manifest, tc1, "");
  model::AddFusionParams(*m, 5);

  const std::uint64_t stage1_before = model::ParamChecksum(*m, 1);
  const std::uint64_t gates_before = model::ParamChecksum(*m, 2);

  SUBCASE("zero steps keep the model identical to stage 1") {
    Rng rng(8);
    const Mat mel = RandomMat(rng, 10, cfg.n_mels);
    const Mat enc = EncodeAudio(*m, mel);
    const auto tokens = std::vector<int>{model::kSotId, model::kLangZhId, 6};
    const Mat a = DecodeLogits(*m, enc, model::AbsentVisual(*m), tokens, false);
    const Mat b = DecodeLogits(*m, enc, model::AbsentVisual(*m), tokens, true);
    CHECK(std::memcmp(a.data(), b.data(),
                      sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
  }

  SUBCASE("stage-2 steps never touch stage-1 parameters") {
    TrainConfig tc2;
    tc2.stage = 2;
    tc2.epochs = 2;
    tc2.batch_pairs = 2;
    tc2.seed = 6;
    TrainStage2(*m, manifest, tc2, "", "");  // no crops: zero visual features
    CHECK(model::ParamChecksum(*m, 1) == stage1_before);
    CHECK(model::ParamChecksum(*m, 2) != gates_before);
  }

  SUBCASE("stage-2 training without fusion params is rejected") {
    auto fresh = model::CreateModel(cfg, 2);
    TrainConfig tc2;
    tc2.stage = 2;
    tc2.epochs = 1;
    CHECK_THROWS_AS(TrainStage2(*fresh, manifest, tc2, "", ""), Error);
  }
}

TEST_CASE("empty training set is rejected") {
  auto m = model::CreateModel(TinyConfig(), 9);
  corpus::PairedManifest empty;
  TrainConfig tc;
  tc.stage = 1;
  CHECK_THROWS_WITH_AS(TrainStage1(*m, empty, tc, ""),
                       doctest::Contains("empty training set"), Error);
}
