// src/avw/features.h
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
// Audio frontend: polyphase resampling to 16 kHz, the 320,000-sample length
// cap, and log-mel spectrograms (25 ms Hann window, 10 ms hop, reflect
// center padding, HTK mel scale, power spectrum, log10 floored at 1e-10).
//
// Normalization: with ref = max(max log value, kMinLogRef), values are
// clamped to ref - 8 and mapped by x -> (x - ref + 4) / 4, which places the
// 8-decade dynamic window in [-1, 1] and digital silence at exactly -1.

#ifndef AVWHISPER_FEATURES_H_
#define AVWHISPER_FEATURES_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "avw/corpus.h"

namespace avw::features {

inline constexpr int kTargetRate = 16000;
inline constexpr int kMaxSamples = 320000;  // 20 s at 16 kHz
inline constexpr int kWinSamples = 400;     // 25 ms
inline constexpr int kHopSamples = 160;     // 10 ms
inline constexpr int kDefaultMels = 80;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kLogRange = 8.0;   // decades kept below the reference
inline constexpr double kMinLogRef = -2.0; // silence reference level

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kTargetRate;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

struct LogMelSpectrogram {
  Eigen::MatrixXd frames;      // time x n_mels, normalized to [-1, 1]
  Eigen::MatrixXd log_frames;  // time x n_mels, raw log10 before clamp/shift
  int n_mels = kDefaultMels;
  double hop_s = 0.010;
  double win_s = 0.025;
};

/// Band-limited rational resampling (Kaiser-windowed sinc, polyphase
/// evaluation). Source rates: 8k, 16k, 22.05k, 44.1k, 48k. 16 kHz input is
/// returned unchanged. Output length is ceil(n * L / M).
Waveform Resample(const Waveform& w, int target_hz = kTargetRate);

/// Truncates to at most 320,000 samples; requires 16 kHz input.
Waveform CapLength(const Waveform& w);

/// Center frequencies (Hz) of the HTK-scale triangular filterbank.
std::vector<double> MelCenterFrequenciesHz(int n_mels);

LogMelSpectrogram LogMel(const Waveform& w, int n_mels = kDefaultMels);

/// Number of spectrogram frames for a waveform of n samples.
inline long FrameCount(long n_samples) { return n_samples / kHopSamples; }

/// resample -> cap -> log-mel for one audio file.
LogMelSpectrogram FeaturizeFile(const std::string& wav_path, int n_mels);

/// Writes `<out_dir>/<utt_id>.mel` blobs for every record. Returns the
/// number of records processed.
int Featurize(const corpus::PairedManifest& manifest, const std::string& out_dir,
              int n_mels);

Eigen::MatrixXd MelFromBlobOrWav(const std::string& feats_dir,
                                 const std::string& utt_id,
                                 const std::string& wav_path, int n_mels);

}  // namespace avw::features

#endif  // AVWHISPER_FEATURES_H_
