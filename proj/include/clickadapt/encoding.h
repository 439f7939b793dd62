// clickadapt/include/clickadapt/encoding.h

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

#ifndef CLICKADAPT_ENCODING_H_
#define CLICKADAPT_ENCODING_H_

#include <span>
#include <vector>

#include "clickadapt/types.h"

namespace clickadapt {

// One [H x W] channel per class. Channel c is all-zero iff there is no click
// of class c; a nonzero channel has maximum exactly 1.
class GuidanceStack {
 public:
  GuidanceStack(int num_classes, int height, int width,
                std::vector<float> channels);

  int num_classes() const { return num_classes_; }
  int height() const { return height_; }
  int width() const { return width_; }
  float at(int c, int row, int col) const {
    return channels_[(static_cast<std::size_t>(c) * height_ + row) * width_ +
                     col];
  }
  std::span<const float> values() const { return channels_; }

 private:
  int num_classes_;
  int height_;
  int width_;
  std::vector<float> channels_;
};

// Sum of box-truncated Gaussians (half-width 3*sigma) centered on each click,
// before per-channel max normalization. Exposed for property tests.
std::vector<double> UnnormalizedGuidance(std::span<const Click> clicks,
                                         int height, int width,
                                         int num_classes,
                                         double guidance_sigma);

// Impulse per click, smoothed with a Gaussian truncated at 3*sigma, each
// channel divided by its maximum. Throws kOutOfBounds.
GuidanceStack EncodeClicks(std::span<const Click> clicks, int height,
                           int width, int num_classes, double guidance_sigma);
inline GuidanceStack EncodeClicks(const ClickSet &clicks, int height,
                                  int width, int num_classes,
                                  double guidance_sigma) {
  return EncodeClicks(clicks.clicks(), height, width, num_classes,
                      guidance_sigma);
}

// Image channels first, then guidance channels in class order.
// Result is [(image.channels() + K) x H x W]. Throws kShapeMismatch.
std::vector<float> AssembleInput(const Image &image,
                                 const GuidanceStack &guidance);

}  // namespace clickadapt

#endif  // CLICKADAPT_ENCODING_H_
