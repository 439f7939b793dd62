// clickadapt/tests/test_encoding.cc

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>

#include "clickadapt/encoding.h"
#include "common.h"
#include "doctest.h"

using namespace clickadapt;

namespace {

// Dense per-pixel sum of truncated Gaussians, then per-channel max
// normalization.
std::vector<double> BruteForceGuidance(std::span<const Click> clicks, int h, int w, int k,
                                       double sigma) {
  std::vector<double> out(static_cast<std::size_t>(k) * h * w, 0.0);
  for (int c = 0; c < k; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) {
        double s = 0.0;
        for (const Click &click : clicks) {
          if (click.class_label != c) continue;
          const double dr = r - click.row, dq = q - click.col;
          if (std::abs(dr) > 3 * sigma || std::abs(dq) > 3 * sigma) continue;
          s += std::exp(-(dr * dr + dq * dq) / (2 * sigma * sigma));
        }
        out[(static_cast<std::size_t>(c) * h + r) * w + q] = s;
      }
    }
    const auto first = out.begin() + static_cast<std::ptrdiff_t>(c) * h * w;
    const double mx = *std::max_element(first, first + h * w);
    if (mx > 0)
      std::for_each(first, first + h * w, [mx](double &v) { v /= mx; });
  }
  return out;
}

}  // namespace

TEST_CASE("guidance equals dense truncated Gaussian oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = rng.UniformInt(8, 20), w = rng.UniformInt(8, 20), k = rng.UniformInt(2, 3);
    const double sigma = rng.Uniform(0.5, 4.0);
    const LabelMask shape = LabelMask::Filled(h, w, k, 0);
    const ClickSet clicks = testing::RandomClicks(rng.UniformInt(1, 6), shape, rng);
    const GuidanceStack g = EncodeClicks(clicks, h, w, k, sigma);
    const std::vector<double> oracle = BruteForceGuidance(clicks.clicks(), h, w, k, sigma);
    REQUIRE(g.values().size() == oracle.size());
    double err = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i)
      err = std::max(err, std::abs(g.values()[i] - oracle[i]));
    CHECK(err < 1e-6);
  }
}

TEST_CASE("guidance channels are zero without clicks and peak at one") {
  ClickSet clicks;
  clicks.Add(2, 3, 1);
  clicks.Add(6, 6, 1);
  const GuidanceStack g = EncodeClicks(clicks, 10, 10, 3, 2.0);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) {
      CHECK(g.at(0, r, c) == 0.0f);
      CHECK(g.at(2, r, c) == 0.0f);
    }
  }
  const auto ch1 = g.values().subspan(100, 100);
  CHECK(*std::max_element(ch1.begin(), ch1.end()) == 1.0f);
  CHECK(g.at(1, 2, 3) > 0.99f);
}

TEST_CASE("guidance is invariant to click order") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const LabelMask shape = LabelMask::Filled(12, 12, 3, 0);
    const ClickSet clicks = testing::RandomClicks(5, shape, rng);
    std::vector<Click> shuffled(clicks.begin(), clicks.end());
    for (std::size_t i = shuffled.size() - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[rng.Below(i + 1)]);
    const GuidanceStack a = EncodeClicks(clicks, 12, 12, 3, 2.5);
    const GuidanceStack b = EncodeClicks(shuffled, 12, 12, 3, 2.5);
    for (std::size_t i = 0; i < a.values().size(); ++i)
      CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-6));
  }
}

TEST_CASE("adding a click never lowers unnormalized guidance") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelMask shape = LabelMask::Filled(10, 10, 2, 0);
    const ClickSet clicks = testing::RandomClicks(4, shape, rng);
    const std::vector<double> before =
        UnnormalizedGuidance(clicks.Prefix(3).clicks(), 10, 10, 2, 2.0);
    const std::vector<double> after = UnnormalizedGuidance(clicks.clicks(), 10, 10, 2, 2.0);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] >= before[i]);
  }
}

TEST_CASE("encoding rejects out-of-bounds clicks") {
  const std::vector<Click> bad = {{10, 0, 1, 1}};
  CHECK_THROWS_AS(EncodeClicks(bad, 10, 10, 2, 3.0), Error);
}

TEST_CASE("assembled input places image channels before guidance") {
  const Image image = Image::Filled(2, 8, 8, 0.25f);
  ClickSet clicks;
  clicks.Add(4, 4, 1);
  const GuidanceStack g = EncodeClicks(clicks, 8, 8, 2, 1.0);
  const std::vector<float> x = AssembleInput(image, g);
  REQUIRE(x.size() == 4u * 64u);
  CHECK(x[0] == 0.25f);
  CHECK(x[64 + 63] == 0.25f);
  CHECK(x[2 * 64 + 4 * 8 + 4] == 0.0f);
  CHECK(x[3 * 64 + 4 * 8 + 4] == 1.0f);
  const Image wrong = Image::Filled(1, 8, 16, 0.f);
  CHECK_THROWS_AS(AssembleInput(wrong, g), Error);
}
