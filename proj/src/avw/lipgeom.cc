// src/avw/lipgeom.cc
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

#include "avw/lipgeom.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "avw/util.h"

namespace avw::lipgeom {

namespace fs = std::filesystem;

FaceLandmarks FromIo(const io::FrameLandmarks& lm) {
  return {{lm.p1x, lm.p1y}, {lm.p2x, lm.p2y}, {lm.p3x, lm.p3y}};
}

namespace {

void CheckFinite(const FaceLandmarks& lm) {
  for (const Point& p : {lm.nose, lm.mouth_left, lm.mouth_right})
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      Throw(ErrorCode::kValidation, "non-finite landmark coordinate");
}

double Dist(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

Point MouthCenter(const FaceLandmarks& lm) {
  CheckFinite(lm);
  return {(lm.mouth_left.x + lm.mouth_right.x) / 2.0,
          (lm.mouth_left.y + lm.mouth_right.y) / 2.0};
}

LipCropSpec CropSpec(const FaceLandmarks& lm) {
  const Point center = MouthCenter(lm);
  const double d_mn = Dist(lm.nose, center);
  const double d_p1p2 = Dist(lm.nose, lm.mouth_left);
  const double width = std::min(3.2 * d_mn, 2.0 * std::max(d_mn, d_p1p2));
  if (!(width > 0.0))
    Throw(ErrorCode::kValidation,
          "degenerate lip geometry: crop width is zero (nose point on the "
          "mouth center)");
  return {center, width};
}

Image CropFrame(const Image& frame, const LipCropSpec& spec) {
  if (frame.height <= 0 || frame.width <= 0 || frame.pixels.empty())
    Throw(ErrorCode::kValidation, "empty frame");
  if (!(spec.width > 0.0))
    Throw(ErrorCode::kValidation, "crop spec width must be positive");

  Image out;
  out.height = kCropSize;
  out.width = kCropSize;
  out.pixels.assign(static_cast<std::size_t>(kCropSize) * kCropSize, 0.0);

  // Pixel (r, c) of the output samples the source at the center of the
  // corresponding cell of the window [center - width/2, center + width/2).
  const double scale = spec.width / kCropSize;
  const double x0 = spec.center.x - spec.width / 2.0;
  const double y0 = spec.center.y - spec.width / 2.0;
  auto sample = [&frame](int r, int c) -> double {
    if (r < 0 || c < 0 || r >= frame.height || c >= frame.width) return 0.0;
    return frame.At(r, c);
  };
  for (int r = 0; r < kCropSize; ++r) {
    const double sy = y0 + (r + 0.5) * scale - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    const double fy = sy - iy;
    for (int c = 0; c < kCropSize; ++c) {
      const double sx = x0 + (c + 0.5) * scale - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const double fx = sx - ix;
      const double v00 = sample(iy, ix);
      const double v01 = sample(iy, ix + 1);
      const double v10 = sample(iy + 1, ix);
      const double v11 = sample(iy + 1, ix + 1);
      out.pixels[static_cast<std::size_t>(r) * kCropSize + c] =
          (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
          fy * ((1.0 - fx) * v10 + fx * v11);
    }
  }
  return out;
}

std::vector<LipCropSpec> TrackSpecs(const std::vector<io::FrameLandmarks>& track,
                                    bool smooth) {
  std::vector<LipCropSpec> specs;
  specs.reserve(track.size());
  for (const auto& lm : track) specs.push_back(CropSpec(FromIo(lm)));
  if (!smooth || specs.size() < 2) return specs;

  const int n = static_cast<int>(specs.size());
  const int half = kSmoothWindow / 2;
  std::vector<LipCropSpec> smoothed = specs;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double sx = 0.0, sy = 0.0;
    for (int k = lo; k <= hi; ++k) {
      sx += specs[k].center.x;
      sy += specs[k].center.y;
    }
    smoothed[i].center = {sx / (hi - lo + 1), sy / (hi - lo + 1)};
  }
  return smoothed;
}

int CropLips(const corpus::PairedManifest& manifest, const std::string& out_dir,
             bool smooth) {
  fs::create_directories(out_dir);
  int processed = 0;
  for (const auto& rec : manifest.records) {
    if (!rec.has_video()) continue;
    const io::FrameStack video = io::ReadFrameStack(*rec.video_path);
    const auto track = io::ReadLandmarks(*rec.landmarks_path);
    if (static_cast<int>(track.size()) != video.n_frames)
      Throw(ErrorCode::kValidation,
            "record \"" + rec.utt_id + "\": " + std::to_string(track.size()) +
                " landmark lines for " + std::to_string(video.n_frames) +
                " video frames");
    std::vector<LipCropSpec> specs;
    try {
      specs = TrackSpecs(track, smooth);
    } catch (const Error& e) {
      Throw(ErrorCode::kValidation,
            "record \"" + rec.utt_id + "\": " + e.what());
    }
    io::FrameStack crops;
    crops.n_frames = video.n_frames;
    crops.height = kCropSize;
    crops.width = kCropSize;
    crops.data.resize(static_cast<std::size_t>(video.n_frames) * kCropSize *
                      kCropSize);
    Image frame;
    frame.height = video.height;
    frame.width = video.width;
    for (int f = 0; f < video.n_frames; ++f) {
      frame.pixels.assign(
          video.data.begin() + static_cast<std::size_t>(f) * video.height * video.width,
          video.data.begin() + static_cast<std::size_t>(f + 1) * video.height * video.width);
      const Image crop = CropFrame(frame, specs[f]);
      std::copy(crop.pixels.begin(), crop.pixels.end(),
                crops.data.begin() + static_cast<std::size_t>(f) * kCropSize * kCropSize);
    }
    const fs::path out_path = fs::path(out_dir) / (rec.utt_id + ".crop");
    io::WriteFrameStack(out_path.string(), crops, io::FrameDtype::kF32);
    ++processed;
  }
  return processed;
}

}  // namespace avw::lipgeom
