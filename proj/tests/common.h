// clickadapt/tests/common.h

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

// Shared fixtures for the unit tests.

#ifndef CLICKADAPT_TESTS_COMMON_H_
#define CLICKADAPT_TESTS_COMMON_H_

#include <cmath>
#include <vector>

#include "clickadapt/rng.h"
#include "clickadapt/segmenter.h"
#include "clickadapt/types.h"

namespace clickadapt::testing {

inline LabelMask RandomMask(int h, int w, int k, Rng &rng) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w);
  for (auto &l : labels) l = static_cast<std::uint8_t>(rng.Below(k));
  return LabelMask(h, w, k, std::move(labels));
}

// Blobby mask: a few random rectangles of random classes on background.
inline LabelMask RandomBlobMask(int h, int w, int k, Rng &rng) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w, 0);
  const int rects = rng.UniformInt(1, 4);
  for (int i = 0; i < rects; ++i) {
    const int r0 = rng.UniformInt(0, h - 1), c0 = rng.UniformInt(0, w - 1);
    const int r1 = rng.UniformInt(r0, h - 1), c1 = rng.UniformInt(c0, w - 1);
    const auto cls = static_cast<std::uint8_t>(rng.UniformInt(1, k - 1));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) labels[static_cast<std::size_t>(r) * w + c] = cls;
  }
  return LabelMask(h, w, k, std::move(labels));
}

inline std::vector<double> RandomLogits(int k, int h, int w, Rng &rng, double scale = 2.0) {
  std::vector<double> z(static_cast<std::size_t>(k) * h * w);
  for (double &v : z) v = scale * rng.Normal();
  return z;
}

inline ProbMap RandomProbs(int k, int h, int w, Rng &rng, double scale = 2.0) {
  return ProbMap::FromLogits(k, h, w, RandomLogits(k, h, w, rng, scale));
}

inline ClickSet RandomClicks(int n, const LabelMask &labels_from, Rng &rng) {
  ClickSet set;
  while (static_cast<int>(set.size()) < n) {
    const int r = rng.UniformInt(0, labels_from.height() - 1);
    const int c = rng.UniformInt(0, labels_from.width() - 1);
    if (set.Contains(r, c)) continue;
    set.Add(r, c, rng.UniformInt(0, labels_from.num_classes() - 1));
  }
  return set;
}

inline Image RandomImage(int channels, int h, int w, Rng &rng) {
  std::vector<float> px(static_cast<std::size_t>(channels) * h * w);
  for (float &v : px) v = static_cast<float>(rng.Uniform());
  return Image(channels, h, w, std::move(px));
}

// Small network used where training quality does not matter.
inline ModelSpec TinySpec(int num_classes = 2) {
  ModelSpec spec;
  spec.depth = 1;
  spec.base_channels = 4;
  spec.num_classes = num_classes;
  return spec;
}

inline double MaxAbsDiff(const std::vector<double> &a, const std::vector<double> &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace clickadapt::testing

#endif  // CLICKADAPT_TESTS_COMMON_H_
