// src/avw/lipgeom.h
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
// Lip region-of-interest geometry. The crop is centered on the mouth
// (midpoint of the two mouth corners) with a square window of side
//   width = min(3.2 * d_MN, 2 * max(d_MN, d_p1p2))
// where d_MN is the distance from the nose point to the mouth center and
// d_p1p2 the distance from the nose point to the left mouth corner. The
// window is resampled to 96x96 with bilinear interpolation, zero padded
// outside the source frame.

#ifndef AVWHISPER_LIPGEOM_H_
#define AVWHISPER_LIPGEOM_H_

#include <string>
#include <vector>

#include "avw/corpus.h"
#include "avw/io.h"

namespace avw::lipgeom {

inline constexpr int kCropSize = 96;
inline constexpr int kSmoothWindow = 5;  // moving average over crop centers

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct FaceLandmarks {
  Point nose;         // p1
  Point mouth_left;   // p2
  Point mouth_right;  // p3
};

struct LipCropSpec {
  Point center;
  double width = 0.0;  // square window side, pixels
};

FaceLandmarks FromIo(const io::FrameLandmarks& lm);

/// Midpoint of the mouth corners. Throws kValidation on non-finite input.
Point MouthCenter(const FaceLandmarks& lm);

/// Crop window from the landmark triple. Throws kValidation when the
/// geometry degenerates to zero width (nose point on the mouth center).
LipCropSpec CropSpec(const FaceLandmarks& lm);

/// One grayscale frame, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  double At(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

/// Extracts the spec's square window resampled to 96x96. Out-of-bounds
/// samples read as zero.
Image CropFrame(const Image& frame, const LipCropSpec& spec);

/// Per-frame specs for a landmark track; when `smooth` is set, crop centers
/// are replaced by a centered 5-frame moving average (widths stay per-frame).
std::vector<LipCropSpec> TrackSpecs(const std::vector<io::FrameLandmarks>& track,
                                    bool smooth);

/// Processes every video record of the manifest: reads the frame stack and
/// landmarks, crops per frame, writes `<out_dir>/<utt_id>.crop` stacks
/// (f32). Returns the number of records processed.
int CropLips(const corpus::PairedManifest& manifest, const std::string& out_dir,
             bool smooth);

}  // namespace avw::lipgeom

#endif  // AVWHISPER_LIPGEOM_H_
