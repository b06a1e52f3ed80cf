// src/avw/synth.h
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
//
// Desk-scale synthetic corpus. Every utterance comes in a whisper/normal
// pair reading the same random transcript: the normal variant renders each
// character as a short harmonic tone (detectable f0 keyed to the
// character), the whisper variant as band-passed noise with the same
// amplitude envelope (no f0). Three out of four speakers also get a
// rendered frontal "face" video with mouth opening tracking the envelope,
// plus per-frame nose/mouth-corner landmarks.

#ifndef AVWHISPER_SYNTH_H_
#define AVWHISPER_SYNTH_H_

#include <cstdint>
#include <string>

#include "avw/corpus.h"

namespace avw::synth {

struct SynthOptions {
  int n_speakers = 8;
  int n_utts = 20;  // paired utterances per speaker
  std::uint64_t seed = 0;
  std::string out_dir;
  int alphabet_size = 24;  // transcripts draw from 'a'.. ('a'+size-1)
  int min_chars = 3;
  int max_chars = 8;
  bool with_video = true;  // speakers s with s % 4 == 3 stay audio-only
};

/// Writes out_dir/{utterances.tsv, audio/, video/, landmarks/} and returns
/// the manifest (all whisper records initially unpaired). Deterministic in
/// the seed.
corpus::PairedManifest MakeSyntheticCorpus(const SynthOptions& opts);

/// Character envelope at a sample offset within the rendered audio; exposed
/// so video rendering and tests share the exact curve.
double EnvelopeAt(long sample, int n_chars);

// Rendering geometry shared with tests.
inline constexpr int kSampleRate = 16000;
inline constexpr int kCharSamples = 1600;   // 100 ms per character
inline constexpr int kGuardSamples = 800;   // 50 ms head and tail silence
inline constexpr int kVideoFps = 25;
inline constexpr int kVideoW = 160;
inline constexpr int kVideoH = 120;

}  // namespace avw::synth

#endif  // AVWHISPER_SYNTH_H_
