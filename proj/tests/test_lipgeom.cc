// tests/test_lipgeom.cc
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

#include <doctest.h>

#include <cmath>

#include "avw/util.h"

using namespace avw;
using namespace avw::lipgeom;

namespace {

Image ConstantImage(int h, int w, double v) {
  Image img;
  img.height = h;
  img.width = w;
  img.pixels.assign(static_cast<std::size_t>(h) * w, v);
  return img;
}

Image RampImage(int h, int w) {
  Image img;
  img.height = h;
  img.width = w;
  img.pixels.resize(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      img.pixels[static_cast<std::size_t>(r) * w + c] = 3.0 * r + 7.0 * c;
  return img;
}

}  // namespace

TEST_CASE("mouth center examples") {
  CHECK(MouthCenter({{0, 0}, {40, 60}, {60, 60}}).x == 50.0);
  CHECK(MouthCenter({{0, 0}, {40, 60}, {60, 60}}).y == 60.0);
  const Point degenerate = MouthCenter({{5, 5}, {10, 10}, {10, 10}});
  CHECK(degenerate.x == 10.0);
  CHECK(degenerate.y == 10.0);
  const Point p = MouthCenter({{0, 0}, {0, 0}, {3, 4}});
  CHECK(p.x == 1.5);
  CHECK(p.y == 2.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(MouthCenter({{inf, 0}, {0, 0}, {1, 1}}), Error);
}

TEST_CASE("crop spec evaluates the width formula") {
  const LipCropSpec spec = CropSpec({{50, 40}, {40, 60}, {60, 60}});
  CHECK(spec.center.x == 50.0);
  CHECK(spec.center.y == 60.0);
  // d_MN = 20, d_p1p2 = sqrt(500); min(64, 2*sqrt(500)) = 2*sqrt(500).
  CHECK(spec.width == doctest::Approx(2.0 * std::sqrt(500.0)).epsilon(1e-12));

  SUBCASE("nose on the mouth center degenerates") {
    CHECK_THROWS_WITH_AS(CropSpec({{50, 60}, {40, 60}, {60, 60}}),
                         doctest::Contains("degenerate"), Error);
  }
  SUBCASE("collinear points with zero d_MN degenerate") {
    CHECK_THROWS_AS(CropSpec({{0, 0}, {0, 10}, {0, -10}}), Error);
  }
  SUBCASE("all three points coincident degenerate") {
    CHECK_THROWS_AS(CropSpec({{1, 1}, {1, 1}, {1, 1}}), Error);
  }
}

TEST_CASE("crop spec random oracle hits both min branches") {
  Rng rng(123);
  int branch_a = 0, branch_b = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    FaceLandmarks lm;
    lm.nose = {rng.Uniform(0, 200), rng.Uniform(0, 200)};
    lm.mouth_left = {rng.Uniform(0, 200), rng.Uniform(0, 200)};
    lm.mouth_right = {rng.Uniform(0, 200), rng.Uniform(0, 200)};
    const double cx = (lm.mouth_left.x + lm.mouth_right.x) / 2;
    const double cy = (lm.mouth_left.y + lm.mouth_right.y) / 2;
    const double d_mn = std::hypot(lm.nose.x - cx, lm.nose.y - cy);
    const double d12 =
        std::hypot(lm.nose.x - lm.mouth_left.x, lm.nose.y - lm.mouth_left.y);
    const double expect = std::min(3.2 * d_mn, 2.0 * std::max(d_mn, d12));
    if (expect <= 0.0) continue;
    const LipCropSpec spec = CropSpec(lm);
    CHECK(std::abs(spec.center.x - cx) < 1e-9);
    CHECK(std::abs(spec.center.y - cy) < 1e-9);
    CHECK(std::abs(spec.width - expect) < 1e-9);
    // width never exceeds either branch and equals one of them
    CHECK(spec.width <= 3.2 * d_mn + 1e-12);
    CHECK(spec.width <= 2.0 * std::max(d_mn, d12) + 1e-12);
    const bool eq_a = std::abs(spec.width - 3.2 * d_mn) < 1e-9;
    const bool eq_b = std::abs(spec.width - 2.0 * std::max(d_mn, d12)) < 1e-9;
    CHECK((eq_a || eq_b));
    branch_a += eq_a;
    branch_b += eq_b;
  }
  CHECK(branch_a > 50);
  CHECK(branch_b > 50);
}

TEST_CASE("crop spec scale covariance") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    FaceLandmarks lm;
    lm.nose = {rng.Uniform(1, 100), rng.Uniform(1, 100)};
    lm.mouth_left = {rng.Uniform(1, 100), rng.Uniform(1, 100)};
    lm.mouth_right = {rng.Uniform(1, 100), rng.Uniform(1, 100)};
    const double s = rng.Uniform(0.1, 8.0);
    LipCropSpec base;
    try {
      base = CropSpec(lm);
    } catch (const Error&) {
      continue;
    }
    FaceLandmarks scaled{{lm.nose.x * s, lm.nose.y * s},
                         {lm.mouth_left.x * s, lm.mouth_left.y * s},
                         {lm.mouth_right.x * s, lm.mouth_right.y * s}};
    const LipCropSpec sc = CropSpec(scaled);
    CHECK(sc.width == doctest::Approx(base.width * s).epsilon(1e-12));
    CHECK(sc.center.x == doctest::Approx(base.center.x * s).epsilon(1e-12));
  }
}

TEST_CASE("crop frame spec examples") {
  SUBCASE("constant frame stays constant") {
    const Image img = ConstantImage(120, 160, 37.0);
    const Image out = CropFrame(img, {{80.0, 60.0}, 40.0});
    for (double v : out.pixels) CHECK(v == doctest::Approx(37.0).epsilon(1e-12));
  }

  SUBCASE("corner crop zero-pads outside") {
    const Image img = ConstantImage(100, 100, 10.0);
    const Image out = CropFrame(img, {{0.0, 0.0}, 50.0});
    // Top-left output quadrant samples entirely outside the frame.
    CHECK(out.At(0, 0) == 0.0);
    CHECK(out.At(95, 95) == doctest::Approx(10.0).epsilon(1e-12));
  }

  SUBCASE("aligned 96-pixel window copies exactly") {
    const Image img = RampImage(200, 200);
    // center such that x0 = cx - 48 is an integer: cx = 100 -> x0 = 52.
    const Image out = CropFrame(img, {{100.0, 100.0}, 96.0});
    for (int r = 0; r < 96; ++r)
      for (int c = 0; c < 96; ++c)
        CHECK(out.At(r, c) == doctest::Approx(img.At(52 + r, 52 + c)).epsilon(1e-12));
  }

  SUBCASE("empty frame is an error") {
    Image img;
    CHECK_THROWS_AS(CropFrame(img, {{0, 0}, 10.0}), Error);
  }
}

TEST_CASE("crop is translation equivariant away from borders") {
  const Image img = RampImage(300, 300);
  FaceLandmarks lm{{150, 130}, {135, 150}, {165, 150}};
  const Image a = CropFrame(img, CropSpec(lm));

  const double dx = 17, dy = -9;
  // Translate the image content by (dx, dy): shifted(r, c) = img(r-dy, c-dx).
  Image shifted = ConstantImage(300, 300, 0.0);
  for (int r = 0; r < 300; ++r)
    for (int c = 0; c < 300; ++c) {
      const int sr = r - static_cast<int>(dy), sc = c - static_cast<int>(dx);
      if (sr >= 0 && sr < 300 && sc >= 0 && sc < 300)
        shifted.pixels[static_cast<std::size_t>(r) * 300 + c] = img.At(sr, sc);
    }
  FaceLandmarks moved{{150 + dx, 130 + dy}, {135 + dx, 150 + dy},
                      {165 + dx, 150 + dy}};
  const Image b = CropFrame(shifted, CropSpec(moved));
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    CHECK(b.pixels[i] == doctest::Approx(a.pixels[i]).epsilon(1e-12));
}

TEST_CASE("track smoothing averages centers over five frames") {
  std::vector<io::FrameLandmarks> track;
  for (int f = 0; f < 7; ++f) {
    io::FrameLandmarks lm;
    lm.frame_index = f;
    lm.p1x = 50;
    lm.p1y = 40;
    lm.p2x = 40.0 + f * f;  // accelerating mouth drift
    lm.p2y = 60;
    lm.p3x = 60.0 + f * f;
    lm.p3y = 60;
    track.push_back(lm);
  }
  const auto raw = TrackSpecs(track, false);
  const auto smooth = TrackSpecs(track, true);
  REQUIRE(raw.size() == 7);
  // Raw center x at frame f is 50 + f^2.
  CHECK(raw[3].center.x == doctest::Approx(59.0));
  CHECK(smooth[3].center.x ==
        doctest::Approx((51.0 + 54 + 59 + 66 + 75) / 5.0).epsilon(1e-12));
  // Boundary frame 0 averages the available window {0,1,2}.
  CHECK(smooth[0].center.x ==
        doctest::Approx((50.0 + 51 + 54) / 3.0).epsilon(1e-12));
  // Widths stay per-frame.
  CHECK(smooth[3].width == doctest::Approx(raw[3].width).epsilon(1e-12));
}
