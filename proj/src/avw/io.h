// src/avw/io.h
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
// File formats. All binary containers are little-endian and carry an FNV-1a
// checksum of their payload.
//
//   frame stack (".frames" / ".crop"):
//     magic "AVWF" | u32 version=1 | u32 n_frames | u32 height | u32 width
//     | u32 dtype (0 = u8, 1 = f32) | u64 fnv1a(payload) | payload, frames
//     concatenated row-major.
//
//   feature cache (".mel"):
//     magic "AVWM" | u32 version=1 | u32 time | u32 n_mels | u32 dtype
//     (2 = f64) | u64 fnv1a(payload) | payload: time rows of n_mels doubles.
//
//   landmarks file: UTF-8 text, one line per frame:
//     frame_index p1x p1y p2x p2y p3x p3y   (extra trailing reals ignored)

#ifndef AVWHISPER_IO_H_
#define AVWHISPER_IO_H_

#include <cstdint>
#include <string>
#include <vector>

namespace avw::io {

struct Wave {
  std::vector<double> samples;  // mono, in [-1, 1] for PCM16 input
  int sample_rate = 0;
};

Wave ReadWav(const std::string& path);
void WriteWavPcm16(const std::string& path, const std::vector<double>& samples,
                   int sample_rate);
/// Sample count / rate straight from the header, without decoding payload.
double WavDurationSeconds(const std::string& path);

enum class FrameDtype : std::uint32_t { kU8 = 0, kF32 = 1 };

struct FrameStack {
  int n_frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // n_frames * height * width, row-major

  double At(int f, int r, int c) const {
    return data[(static_cast<std::size_t>(f) * height + r) * width + c];
  }
  double& At(int f, int r, int c) {
    return data[(static_cast<std::size_t>(f) * height + r) * width + c];
  }
};

FrameStack ReadFrameStack(const std::string& path);
void WriteFrameStack(const std::string& path, const FrameStack& stack,
                     FrameDtype dtype);

struct MelBlob {
  int time = 0;
  int n_mels = 0;
  std::vector<double> data;  // time rows of n_mels
};

MelBlob ReadMelBlob(const std::string& path);
void WriteMelBlob(const std::string& path, const MelBlob& blob);

struct FrameLandmarks {
  int frame_index = 0;
  double p1x = 0, p1y = 0;  // nose point
  double p2x = 0, p2y = 0;  // left mouth corner
  double p3x = 0, p3y = 0;  // right mouth corner
};

std::vector<FrameLandmarks> ReadLandmarks(const std::string& path);
void WriteLandmarks(const std::string& path,
                    const std::vector<FrameLandmarks>& frames);

std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& content);

}  // namespace avw::io

#endif  // AVWHISPER_IO_H_
