// src/avw/synth.cc
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

#include "avw/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "avw/io.h"
#include "avw/util.h"

namespace avw::synth {

namespace fs = std::filesystem;

namespace {

constexpr int kRampSamples = 160;  // 10 ms attack/release inside a character
// Character frequencies are geometrically spaced so neighboring characters
// land in distinct mel bands (the mel scale is roughly logarithmic).
constexpr double kBaseF0 = 150.0;     // normal-speech fundamental for char 0
constexpr double kF0Ratio = 1.09;
constexpr double kNoiseBase = 700.0;  // whisper band center for char 0
constexpr double kNoiseRatio = 1.07;

double CharEnvelope(long offset) {
  if (offset < 0 || offset >= kCharSamples) return 0.0;
  if (offset < kRampSamples) {
    const double s = std::sin(M_PI_2 * offset / kRampSamples);
    return s * s;
  }
  if (offset >= kCharSamples - kRampSamples) {
    const double s =
        std::sin(M_PI_2 * (kCharSamples - offset) / kRampSamples);
    return s * s;
  }
  return 1.0;
}

/// RBJ biquad band-pass (constant skirt gain), applied in place.
void BandPass(std::vector<double>& x, double fc, double q) {
  const double w0 = 2.0 * M_PI * fc / kSampleRate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double b0 = q * alpha, b1 = 0.0, b2 = -q * alpha;
  const double a0 = 1.0 + alpha, a1 = -2.0 * std::cos(w0), a2 = 1.0 - alpha;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y =
        (b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2) / a0;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

std::vector<double> RenderAudio(const std::string& text, bool whisper,
                                Rng& rng) {
  const int n_chars = static_cast<int>(text.size());
  const long n = 2L * kGuardSamples + static_cast<long>(n_chars) * kCharSamples;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int ci = 0; ci < n_chars; ++ci) {
    const int idx = text[static_cast<std::size_t>(ci)] - 'a';
    const long base = kGuardSamples + static_cast<long>(ci) * kCharSamples;
    if (!whisper) {
      const double f0 = kBaseF0 * std::pow(kF0Ratio, idx);
      const double phase = 0.7 * idx;
      for (long s = 0; s < kCharSamples; ++s) {
        const double tt = static_cast<double>(s) / kSampleRate;
        const double tone = std::sin(2.0 * M_PI * f0 * tt + phase) +
                            0.5 * std::sin(4.0 * M_PI * f0 * tt + 2 * phase) +
                            0.25 * std::sin(6.0 * M_PI * f0 * tt + 3 * phase);
        out[static_cast<std::size_t>(base + s)] =
            0.3 / 1.75 * CharEnvelope(s) * tone;
      }
    } else {
      std::vector<double> noise(kCharSamples);
      for (double& v : noise) v = rng.Uniform(-1.0, 1.0);
      BandPass(noise, kNoiseBase * std::pow(kNoiseRatio, idx), 1.0);
      double peak = 1e-12;
      for (double v : noise) peak = std::max(peak, std::abs(v));
      for (long s = 0; s < kCharSamples; ++s)
        out[static_cast<std::size_t>(base + s)] =
            0.15 * CharEnvelope(s) * noise[static_cast<std::size_t>(s)] / peak;
    }
  }
  return out;
}

io::FrameStack RenderVideo(int n_chars, long n_samples, Rng& rng,
                           std::vector<io::FrameLandmarks>* landmarks) {
  const int n_frames = static_cast<int>(
      (n_samples * kVideoFps + kSampleRate - 1) / kSampleRate);
  io::FrameStack stack;
  stack.n_frames = n_frames;
  stack.height = kVideoH;
  stack.width = kVideoW;
  stack.data.assign(
      static_cast<std::size_t>(n_frames) * kVideoH * kVideoW, 40.0);
  const double cx = kVideoW / 2.0, cy = 70.0;
  for (int f = 0; f < n_frames; ++f) {
    const long mid_sample =
        static_cast<long>((f + 0.5) * kSampleRate / kVideoFps);
    const double env = EnvelopeAt(mid_sample, n_chars);
    // Face block.
    for (int r = 20; r < 110; ++r)
      for (int c = 30; c < 130; ++c) stack.At(f, r, c) = 120.0;
    // Mouth ellipse opens with the envelope.
    const double ax = 14.0, ay = 2.0 + 10.0 * env;
    for (int r = 0; r < kVideoH; ++r)
      for (int c = 0; c < kVideoW; ++c) {
        const double dx = (c - cx) / ax, dy = (r - cy) / ay;
        if (dx * dx + dy * dy <= 1.0) stack.At(f, r, c) = 220.0;
      }
    io::FrameLandmarks lm;
    lm.frame_index = f;
    lm.p1x = cx;
    lm.p1y = 58.0;
    lm.p2x = cx - ax + rng.Uniform(-0.4, 0.4);
    lm.p2y = cy + rng.Uniform(-0.4, 0.4);
    lm.p3x = cx + ax + rng.Uniform(-0.4, 0.4);
    lm.p3y = cy + rng.Uniform(-0.4, 0.4);
    landmarks->push_back(lm);
  }
  return stack;
}

}  // namespace

double EnvelopeAt(long sample, int n_chars) {
  const long rel = sample - kGuardSamples;
  if (rel < 0 || rel >= static_cast<long>(n_chars) * kCharSamples) return 0.0;
  return CharEnvelope(rel % kCharSamples);
}

corpus::PairedManifest MakeSyntheticCorpus(const SynthOptions& opts) {
  if (opts.n_speakers < 1 || opts.n_speakers > 64 || opts.n_utts < 1)
    Throw(ErrorCode::kInvalidArg, "synthetic corpus wants 1..64 speakers");
  if (opts.alphabet_size < 2 || opts.alphabet_size > 26)
    Throw(ErrorCode::kInvalidArg, "alphabet_size must be in [2, 26]");
  if (opts.out_dir.empty())
    Throw(ErrorCode::kInvalidArg, "synthetic corpus needs an output directory");

  const fs::path root(opts.out_dir);
  fs::create_directories(root / "audio");
  fs::create_directories(root / "video");
  fs::create_directories(root / "landmarks");

  corpus::PairedManifest manifest;
  manifest.split = corpus::Split::kTrain;
  std::ostringstream tsv;

  for (int s = 0; s < opts.n_speakers; ++s) {
    char spk[16];
    std::snprintf(spk, sizeof(spk), "spk%02d", s);
    const bool speaker_video = opts.with_video && (s % 4 != 3);
    for (int u = 0; u < opts.n_utts; ++u) {
      Rng rng = Rng::Derive(opts.seed,
                            0xc0ffeeULL + 1000003ULL * s + 17ULL * u);
      const int len = rng.RangeInt(opts.min_chars, opts.max_chars);
      std::string text;
      for (int i = 0; i < len; ++i)
        text.push_back(static_cast<char>('a' + rng.RangeInt(0, opts.alphabet_size - 1)));

      for (int variant = 0; variant < 2; ++variant) {
        const bool whisper = variant == 0;
        char utt[48];
        std::snprintf(utt, sizeof(utt), "%s_u%03d_%c", spk, u,
                      whisper ? 'w' : 'n');
        Rng audio_rng = Rng::Derive(opts.seed,
                                    0xad10ULL + 2000003ULL * s + 29ULL * u +
                                        (whisper ? 1 : 0));
        const std::vector<double> audio = RenderAudio(text, whisper, audio_rng);
        const std::string audio_rel = std::string("audio/") + utt + ".wav";
        io::WriteWavPcm16((root / audio_rel).string(), audio, kSampleRate);

        std::string video_rel, landmarks_rel;
        if (speaker_video) {
          std::vector<io::FrameLandmarks> lms;
          Rng video_rng = Rng::Derive(opts.seed,
                                      0x71de0ULL + 3000017ULL * s + 31ULL * u +
                                          (whisper ? 1 : 0));
          const io::FrameStack video = RenderVideo(
              len, static_cast<long>(audio.size()), video_rng, &lms);
          video_rel = std::string("video/") + utt + ".frames";
          landmarks_rel = std::string("landmarks/") + utt + ".txt";
          io::WriteFrameStack((root / video_rel).string(), video,
                              io::FrameDtype::kU8);
          io::WriteLandmarks((root / landmarks_rel).string(), lms);
        }

        corpus::UtteranceRecord rec;
        rec.utt_id = utt;
        rec.speaker_id = spk;
        rec.speech_type = whisper ? corpus::SpeechType::kWhisper
                                  : corpus::SpeechType::kNormal;
        rec.text = text;
        rec.language = corpus::Language::kZh;
        rec.audio_path = (root / audio_rel).string();
        if (speaker_video) {
          rec.video_path = (root / video_rel).string();
          rec.landmarks_path = (root / landmarks_rel).string();
        }
        rec.duration_s =
            static_cast<double>(audio.size()) / static_cast<double>(kSampleRate);
        manifest.records.push_back(rec);

        tsv << utt << '\t' << spk << '\t'
            << corpus::ToString(rec.speech_type) << '\t'
            << corpus::ToString(rec.language) << '\t' << text << '\t'
            << audio_rel << '\t' << video_rel << '\t' << landmarks_rel << '\n';
      }
    }
  }

  std::sort(manifest.records.begin(), manifest.records.end(),
            [](const corpus::UtteranceRecord& a,
               const corpus::UtteranceRecord& b) { return a.utt_id < b.utt_id; });
  for (const auto& r : manifest.records)
    if (r.speech_type == corpus::SpeechType::kWhisper)
      manifest.unpaired.push_back(r.utt_id);
  io::WriteTextFile((root / "utterances.tsv").string(), tsv.str());
  corpus::ValidateManifest(manifest, "synthetic corpus");
  return manifest;
}

}  // namespace avw::synth
