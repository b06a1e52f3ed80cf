// src/avw/features.cc
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

#include "avw/features.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "avw/io.h"
#include "avw/util.h"

namespace avw::features {

namespace fs = std::filesystem;

namespace {

constexpr double kKaiserBeta = 8.6;
constexpr int kZeroCrossings = 16;  // sinc half-width, in cutoff periods

double BesselI0(double x) {
  // Power series; converges quickly for the argument range used here.
  double sum = 1.0, term = 1.0;
  const double half = x / 2.0;
  for (int k = 1; k < 200; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

bool SupportedRate(int hz) {
  switch (hz) {
    case 8000:
    case 16000:
    case 22050:
    case 44100:
    case 48000:
      return true;
    default:
      return false;
  }
}

}  // namespace

Waveform Resample(const Waveform& w, int target_hz) {
  if (target_hz != kTargetRate)
    Throw(ErrorCode::kInvalidArg, "resample target must be 16000 Hz");
  if (!SupportedRate(w.sample_rate))
    Throw(ErrorCode::kValidation,
          "unsupported source sample rate: " + std::to_string(w.sample_rate));
  for (double s : w.samples)
    if (!std::isfinite(s))
      Throw(ErrorCode::kValidation, "non-finite sample in waveform");
  if (w.sample_rate == target_hz) return w;

  const long g = std::gcd(static_cast<long>(target_hz),
                          static_cast<long>(w.sample_rate));
  const long up = target_hz / g;          // L
  const long down = w.sample_rate / g;    // M
  const long n_in = static_cast<long>(w.samples.size());
  const long n_out = (n_in * up + down - 1) / down;  // ceil(n*L/M)

  Waveform out;
  out.sample_rate = target_hz;
  out.samples.assign(static_cast<std::size_t>(n_out), 0.0);
  if (n_in == 0) return out;

  // Kaiser-windowed sinc low-pass in the upsampled domain (rate in*L);
  // cutoff at the narrower Nyquist of the two rates.
  const double fc = std::min(w.sample_rate, target_hz) /
                    (2.0 * w.sample_rate * static_cast<double>(up));
  const long half = static_cast<long>(std::ceil(kZeroCrossings / (2.0 * fc)));
  const double i0_beta = BesselI0(kKaiserBeta);
  std::vector<double> kernel(static_cast<std::size_t>(half) + 1);
  for (long t = 0; t <= half; ++t) {
    const double frac = static_cast<double>(t) / half;
    const double win =
        BesselI0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) /
        i0_beta;
    kernel[static_cast<std::size_t>(t)] = up * 2.0 * fc * Sinc(2.0 * fc * t) * win;
  }

  for (long j = 0; j < n_out; ++j) {
    const long u = j * down;  // position in the upsampled grid
    const long i_lo = std::max<long>(0, (u - half + up - 1) / up);
    const long i_hi = std::min<long>(n_in - 1, (u + half) / up);
    double acc = 0.0;
    for (long i = i_lo; i <= i_hi; ++i) {
      const long t = std::labs(u - i * up);
      acc += w.samples[static_cast<std::size_t>(i)] *
             kernel[static_cast<std::size_t>(t)];
    }
    out.samples[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

Waveform CapLength(const Waveform& w) {
  if (w.sample_rate != kTargetRate)
    Throw(ErrorCode::kInvalidArg, "cap_length expects 16 kHz input");
  Waveform out = w;
  if (out.samples.size() > static_cast<std::size_t>(kMaxSamples))
    out.samples.resize(kMaxSamples);
  return out;
}

std::vector<double> MelCenterFrequenciesHz(int n_mels) {
  auto hz_to_mel = [](double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
  };
  auto mel_to_hz = [](double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  };
  const double mel_max = hz_to_mel(kTargetRate / 2.0);
  std::vector<double> centers(static_cast<std::size_t>(n_mels));
  for (int k = 0; k < n_mels; ++k)
    centers[static_cast<std::size_t>(k)] =
        mel_to_hz((k + 1) * mel_max / (n_mels + 1));
  return centers;
}

LogMelSpectrogram LogMel(const Waveform& w, int n_mels) {
  if (w.sample_rate != kTargetRate)
    Throw(ErrorCode::kInvalidArg, "log_mel expects 16 kHz input");
  if (w.samples.empty()) Throw(ErrorCode::kValidation, "empty waveform");
  if (n_mels < 1) Throw(ErrorCode::kInvalidArg, "n_mels must be positive");

  const long n = static_cast<long>(w.samples.size());
  const long n_frames = FrameCount(n);
  const int n_bins = kWinSamples / 2 + 1;

  LogMelSpectrogram out;
  out.n_mels = n_mels;
  out.frames.resize(n_frames, n_mels);
  out.log_frames.resize(n_frames, n_mels);
  if (n_frames == 0) return out;

  // Reflect ("bounce") padding of half a window on each side; well defined
  // for signals shorter than the pad.
  const long pad = kWinSamples / 2;
  auto padded = [&w, n](long i) -> double {
    if (n == 1) return w.samples[0];
    const long m = 2 * (n - 1);
    long idx = ((i % m) + m) % m;
    if (idx >= n) idx = m - idx;
    return w.samples[static_cast<std::size_t>(idx)];
  };

  Eigen::VectorXd window(kWinSamples);
  for (int i = 0; i < kWinSamples; ++i)
    window(i) = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / kWinSamples);

  Eigen::MatrixXd framed(n_frames, kWinSamples);
  for (long f = 0; f < n_frames; ++f) {
    const long start = f * kHopSamples - pad;
    for (int i = 0; i < kWinSamples; ++i)
      framed(f, i) = padded(start + i) * window(i);
  }

  // Real DFT as two dense products against precomputed trig tables.
  Eigen::MatrixXd cos_table(kWinSamples, n_bins), sin_table(kWinSamples, n_bins);
  for (int i = 0; i < kWinSamples; ++i)
    for (int b = 0; b < n_bins; ++b) {
      const double phase = 2.0 * M_PI * i * b / kWinSamples;
      cos_table(i, b) = std::cos(phase);
      sin_table(i, b) = -std::sin(phase);
    }
  const Eigen::MatrixXd re = framed * cos_table;
  const Eigen::MatrixXd im = framed * sin_table;
  const Eigen::MatrixXd power = re.array().square() + im.array().square();

  // HTK-scale triangular filterbank, unit peak.
  auto hz_to_mel = [](double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
  };
  auto mel_to_hz = [](double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  };
  const double mel_max = hz_to_mel(kTargetRate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<std::size_t>(i)] = mel_to_hz(i * mel_max / (n_mels + 1));
  Eigen::MatrixXd filters = Eigen::MatrixXd::Zero(n_bins, n_mels);
  for (int b = 0; b < n_bins; ++b) {
    const double f = b * static_cast<double>(kTargetRate) / kWinSamples;
    for (int k = 0; k < n_mels; ++k) {
      const double lo = edges[static_cast<std::size_t>(k)];
      const double mid = edges[static_cast<std::size_t>(k) + 1];
      const double hi = edges[static_cast<std::size_t>(k) + 2];
      double wgt = 0.0;
      if (f > lo && f < hi)
        wgt = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      filters(b, k) = wgt;
    }
  }

  const Eigen::MatrixXd mel_power = power * filters;
  out.log_frames =
      mel_power.array().max(kLogFloor).log10().matrix();
  const double ref = std::max(out.log_frames.maxCoeff(), kMinLogRef);
  out.frames =
      ((out.log_frames.array().max(ref - kLogRange) - ref + 4.0) / 4.0).matrix();
  return out;
}

LogMelSpectrogram FeaturizeFile(const std::string& wav_path, int n_mels) {
  const io::Wave wav = io::ReadWav(wav_path);
  Waveform w;
  w.samples = wav.samples;
  w.sample_rate = wav.sample_rate;
  return LogMel(CapLength(Resample(w)), n_mels);
}

int Featurize(const corpus::PairedManifest& manifest, const std::string& out_dir,
              int n_mels) {
  fs::create_directories(out_dir);
  int processed = 0;
  for (const auto& rec : manifest.records) {
    const LogMelSpectrogram mel = FeaturizeFile(rec.audio_path, n_mels);
    io::MelBlob blob;
    blob.time = static_cast<int>(mel.frames.rows());
    blob.n_mels = n_mels;
    blob.data.resize(static_cast<std::size_t>(blob.time) * n_mels);
    for (int t = 0; t < blob.time; ++t)
      for (int k = 0; k < n_mels; ++k)
        blob.data[static_cast<std::size_t>(t) * n_mels + k] = mel.frames(t, k);
    const fs::path out_path = fs::path(out_dir) / (rec.utt_id + ".mel");
    io::WriteMelBlob(out_path.string(), blob);
    ++processed;
  }
  return processed;
}

Eigen::MatrixXd MelFromBlobOrWav(const std::string& feats_dir,
                                 const std::string& utt_id,
                                 const std::string& wav_path, int n_mels) {
  if (!feats_dir.empty()) {
    const fs::path blob_path = fs::path(feats_dir) / (utt_id + ".mel");
    if (!fs::exists(blob_path))
      Throw(ErrorCode::kNotFound,
            "no cached features for \"" + utt_id + "\" in " + feats_dir);
    const io::MelBlob blob = io::ReadMelBlob(blob_path.string());
    if (blob.n_mels != n_mels)
      Throw(ErrorCode::kValidation,
            "cached features for \"" + utt_id + "\" have " +
                std::to_string(blob.n_mels) + " mel bins, model expects " +
                std::to_string(n_mels));
    Eigen::MatrixXd mel(blob.time, blob.n_mels);
    for (int t = 0; t < blob.time; ++t)
      for (int k = 0; k < blob.n_mels; ++k)
        mel(t, k) = blob.data[static_cast<std::size_t>(t) * blob.n_mels + k];
    return mel;
  }
  return FeaturizeFile(wav_path, n_mels).frames;
}

}  // namespace avw::features
