// clickadapt/include/clickadapt/types.h

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

#ifndef CLICKADAPT_TYPES_H_
#define CLICKADAPT_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "clickadapt/errors.h"

namespace clickadapt {

// Smallest image side. Masks and probability maps accept any positive size.
inline constexpr int kMinRasterSide = 8;

// Dense [channels x H x W] raster with values in [0, 1]. Coordinates are
// (row, col) with the origin at the top-left.
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, std::vector<float> pixels);

  static Image Filled(int channels, int height, int width, float value);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  float at(int c, int row, int col) const {
    return pixels_[(static_cast<std::size_t>(c) * height_ + row) * width_ +
                   col];
  }
  std::span<const float> pixels() const { return pixels_; }
  std::span<const float> channel(int c) const {
    return std::span<const float>(pixels_).subspan(c * plane_size(),
                                                   plane_size());
  }

  bool operator==(const Image &other) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

// Integer class raster; every label is < num_classes.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int height, int width, int num_classes,
            std::vector<std::uint8_t> labels);

  static LabelMask Filled(int height, int width, int num_classes,
                          int value);
  // Test fixture helper: rows of equal length.
  static LabelMask FromRows(
      std::initializer_list<std::initializer_list<int>> rows,
      int num_classes);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }

  int at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }
  int at_index(std::size_t index) const { return labels_[index]; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  // Returns a copy with one pixel changed.
  LabelMask WithLabel(int row, int col, int value) const;

  bool operator==(const LabelMask &other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> labels_;
};

// Per-pixel class distribution [K x H x W]; normalized within 1e-5.
class ProbMap {
 public:
  ProbMap() = default;
  ProbMap(int num_classes, int height, int width, std::vector<double> probs);

  // Softmax over the class axis of raw scores laid out like a ProbMap.
  static ProbMap FromLogits(int num_classes, int height, int width,
                            std::span<const double> logits);
  static ProbMap OneHot(const LabelMask &mask);
  static ProbMap Uniform(int num_classes, int height, int width);

  int num_classes() const { return num_classes_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  double at(int k, int row, int col) const {
    return probs_[(static_cast<std::size_t>(k) * height_ + row) * width_ +
                  col];
  }
  double at_index(int k, std::size_t pixel) const {
    return probs_[k * plane_size() + pixel];
  }
  std::span<const double> probs() const { return probs_; }

  // Per-pixel argmax; ties resolve to the smallest class index.
  LabelMask Argmax() const;

  bool operator==(const ProbMap &other) const = default;

 private:
  int num_classes_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> probs_;
};

struct Click {
  int row = 0;
  int col = 0;
  int class_label = 0;
  int ordinal = 0;  // 1-based insertion index

  bool operator==(const Click &other) const = default;
};

// Ordered clicks with unique positions and contiguous ordinals 1..n.
class ClickSet {
 public:
  ClickSet() = default;

  // Appends a click at (row, col) and assigns it the next ordinal. Throws
  // kDuplicateClick if the position is already taken.
  const Click &Add(int row, int col, int class_label);
  // Re-numbers the click to the next ordinal.
  const Click &Add(const Click &click) {
    return Add(click.row, click.col, click.class_label);
  }

  bool Contains(int row, int col) const;
  bool empty() const { return clicks_.empty(); }
  std::size_t size() const { return clicks_.size(); }
  const Click &operator[](std::size_t i) const { return clicks_[i]; }
  const Click &back() const { return clicks_.back(); }
  std::span<const Click> clicks() const { return clicks_; }
  auto begin() const { return clicks_.begin(); }
  auto end() const { return clicks_.end(); }

  // The first `n` clicks (ordinals unchanged).
  ClickSet Prefix(std::size_t n) const;

  bool operator==(const ClickSet &other) const = default;

 private:
  std::vector<Click> clicks_;
};

// Throws kShapeMismatch / kLabelOutOfRange.
void ValidatePair(const Image &image, const LabelMask &mask);
// Throws kOutOfBounds / kLabelOutOfRange / kInvalidArgument.
void ValidateClicks(std::span<const Click> clicks, int height, int width,
                    int num_classes);
// Checks ordinal contiguity and position uniqueness.
bool IsWellFormed(const ClickSet &clicks);
// Checks simplex normalization within `tolerance`.
bool IsNormalized(const ProbMap &probs, double tolerance = 1e-5);

}  // namespace clickadapt

#endif  // CLICKADAPT_TYPES_H_
