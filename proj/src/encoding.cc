// clickadapt/src/encoding.cc

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

#include "clickadapt/encoding.h"

#include <algorithm>
#include <cmath>

namespace clickadapt {

GuidanceStack::GuidanceStack(int num_classes, int height, int width,
                             std::vector<float> channels)
    : num_classes_(num_classes), height_(height), width_(width),
      channels_(std::move(channels)) {
  if (channels_.size() !=
      static_cast<std::size_t>(num_classes) * height * width)
    throw Error(ErrorCode::kShapeMismatch, "guidance buffer size");
}

std::vector<double> UnnormalizedGuidance(std::span<const Click> clicks,
                                         int height, int width,
                                         int num_classes,
                                         double guidance_sigma) {
  if (!(guidance_sigma > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "guidance_sigma must be > 0");
  ValidateClicks(clicks, height, width, num_classes);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<double> raw(plane * num_classes, 0.0);
  const int radius = static_cast<int>(std::floor(3.0 * guidance_sigma));
  const double inv_two_var = 1.0 / (2.0 * guidance_sigma * guidance_sigma);
  for (const Click &c : clicks) {
    double *channel = raw.data() + c.class_label * plane;
    const int r0 = std::max(0, c.row - radius);
    const int r1 = std::min(height - 1, c.row + radius);
    const int c0 = std::max(0, c.col - radius);
    const int c1 = std::min(width - 1, c.col + radius);
    for (int r = r0; r <= r1; ++r) {
      const int dr = r - c.row;
      for (int q = c0; q <= c1; ++q) {
        const int dc = q - c.col;
        channel[static_cast<std::size_t>(r) * width + q] +=
            std::exp(-(dr * dr + dc * dc) * inv_two_var);
      }
    }
  }
  return raw;
}

GuidanceStack EncodeClicks(std::span<const Click> clicks, int height,
                           int width, int num_classes,
                           double guidance_sigma) {
  std::vector<double> raw =
      UnnormalizedGuidance(clicks, height, width, num_classes, guidance_sigma);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<float> out(raw.size(), 0.0f);
  for (int k = 0; k < num_classes; ++k) {
    auto first = raw.begin() + k * plane;
    const double peak = *std::max_element(first, first + plane);
    if (peak <= 0.0) continue;
    for (std::size_t p = 0; p < plane; ++p)
      out[k * plane + p] = static_cast<float>(raw[k * plane + p] / peak);
  }
  return GuidanceStack(num_classes, height, width, std::move(out));
}

std::vector<float> AssembleInput(const Image &image,
                                 const GuidanceStack &guidance) {
  if (image.height() != guidance.height() ||
      image.width() != guidance.width())
    throw Error(ErrorCode::kShapeMismatch, "image vs guidance extent");
  std::vector<float> input;
  input.reserve(image.pixels().size() + guidance.values().size());
  input.insert(input.end(), image.pixels().begin(), image.pixels().end());
  input.insert(input.end(), guidance.values().begin(), guidance.values().end());
  return input;
}

}  // namespace clickadapt
