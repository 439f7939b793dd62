// clickadapt/src/types.cc

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

#include "clickadapt/types.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace clickadapt {

const char *ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDuplicateClick: return "DuplicateClick";
    case ErrorCode::kEmptyClickSet: return "EmptyClickSet";
    case ErrorCode::kNoActiveTerm: return "NoActiveTerm";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kEmptyForeground: return "EmptyForeground";
    case ErrorCode::kNoError: return "NoError";
    case ErrorCode::kMissingFinalMask: return "MissingFinalMask";
    case ErrorCode::kBadImage: return "BadImage";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kSessionNotFound: return "SessionNotFound";
    case ErrorCode::kConcurrentClick: return "ConcurrentClick";
    case ErrorCode::kNoModelLoaded: return "NoModelLoaded";
    case ErrorCode::kSessionClosed: return "SessionClosed";
    case ErrorCode::kNotSupported: return "NotSupported";
    case ErrorCode::kImageAlreadySet: return "ImageAlreadySet";
  }
  return "Unknown";
}

namespace {

void CheckRasterSides(int height, int width, int min_side) {
  if (height < min_side || width < min_side)
    throw Error(ErrorCode::kInvalidArgument,
                "raster must be at least " + std::to_string(min_side) + "x" +
                    std::to_string(min_side) + ", got " + std::to_string(height) +
                    "x" + std::to_string(width));
}

}  // namespace

Image::Image(int channels, int height, int width, std::vector<float> pixels)
    : channels_(channels), height_(height), width_(width),
      pixels_(std::move(pixels)) {
  CheckRasterSides(height, width, kMinRasterSide);
  if (channels < 1)
    throw Error(ErrorCode::kInvalidArgument, "image needs >= 1 channel");
  if (pixels_.size() != static_cast<std::size_t>(channels) * height * width)
    throw Error(ErrorCode::kShapeMismatch, "pixel buffer size");
  for (float p : pixels_) {
    if (!std::isfinite(p))
      throw Error(ErrorCode::kInvalidArgument, "non-finite pixel");
  }
}

Image Image::Filled(int channels, int height, int width, float value) {
  return Image(channels, height, width,
               std::vector<float>(static_cast<std::size_t>(channels) *
                                      height * width,
                                  value));
}

LabelMask::LabelMask(int height, int width, int num_classes,
                     std::vector<std::uint8_t> labels)
    : height_(height), width_(width), num_classes_(num_classes),
      labels_(std::move(labels)) {
  CheckRasterSides(height, width, 1);
  if (num_classes < 2 || num_classes > 255)
    throw Error(ErrorCode::kInvalidArgument, "num_classes must be in [2,255]");
  if (labels_.size() != static_cast<std::size_t>(height) * width)
    throw Error(ErrorCode::kShapeMismatch, "label buffer size");
  for (std::uint8_t v : labels_) {
    if (v >= num_classes)
      throw Error(ErrorCode::kLabelOutOfRange,
                  "label " + std::to_string(v) + " >= K=" +
                      std::to_string(num_classes));
  }
}

LabelMask LabelMask::Filled(int height, int width, int num_classes,
                            int value) {
  return LabelMask(height, width, num_classes,
                   std::vector<std::uint8_t>(
                       static_cast<std::size_t>(height) * width,
                       static_cast<std::uint8_t>(value)));
}

LabelMask LabelMask::FromRows(
    std::initializer_list<std::initializer_list<int>> rows, int num_classes) {
  int height = static_cast<int>(rows.size());
  int width = height > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  std::vector<std::uint8_t> labels;
  labels.reserve(static_cast<std::size_t>(height) * width);
  for (const auto &row : rows) {
    if (static_cast<int>(row.size()) != width)
      throw Error(ErrorCode::kShapeMismatch, "ragged fixture rows");
    for (int v : row) {
      if (v < 0 || v >= num_classes)
        throw Error(ErrorCode::kLabelOutOfRange, "fixture label");
      labels.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return LabelMask(height, width, num_classes, std::move(labels));
}

LabelMask LabelMask::WithLabel(int row, int col, int value) const {
  if (row < 0 || row >= height_ || col < 0 || col >= width_)
    throw Error(ErrorCode::kOutOfBounds, "WithLabel");
  std::vector<std::uint8_t> labels = labels_;
  labels[static_cast<std::size_t>(row) * width_ + col] =
      static_cast<std::uint8_t>(value);
  return LabelMask(height_, width_, num_classes_, std::move(labels));
}

ProbMap::ProbMap(int num_classes, int height, int width,
                 std::vector<double> probs)
    : num_classes_(num_classes), height_(height), width_(width),
      probs_(std::move(probs)) {
  CheckRasterSides(height, width, 1);
  if (num_classes < 2)
    throw Error(ErrorCode::kInvalidArgument, "ProbMap needs K >= 2");
  if (probs_.size() != static_cast<std::size_t>(num_classes) * height * width)
    throw Error(ErrorCode::kShapeMismatch, "probability buffer size");
  if (!IsNormalized(*this))
    throw Error(ErrorCode::kInvalidArgument, "ProbMap is not normalized");
}

ProbMap ProbMap::FromLogits(int num_classes, int height, int width,
                            std::span<const double> logits) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (logits.size() != plane * num_classes)
    throw Error(ErrorCode::kShapeMismatch, "logit buffer size");
  std::vector<double> probs(logits.size());
  for (std::size_t p = 0; p < plane; ++p) {
    double max_logit = logits[p];
    for (int k = 1; k < num_classes; ++k)
      max_logit = std::max(max_logit, logits[k * plane + p]);
    double total = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      double e = std::exp(logits[k * plane + p] - max_logit);
      probs[k * plane + p] = e;
      total += e;
    }
    for (int k = 0; k < num_classes; ++k) probs[k * plane + p] /= total;
  }
  return ProbMap(num_classes, height, width, std::move(probs));
}

ProbMap ProbMap::OneHot(const LabelMask &mask) {
  const std::size_t plane = mask.size();
  std::vector<double> probs(plane * mask.num_classes(), 0.0);
  for (std::size_t p = 0; p < plane; ++p)
    probs[mask.at_index(p) * plane + p] = 1.0;
  return ProbMap(mask.num_classes(), mask.height(), mask.width(),
                 std::move(probs));
}

ProbMap ProbMap::Uniform(int num_classes, int height, int width) {
  return ProbMap(num_classes, height, width,
                 std::vector<double>(static_cast<std::size_t>(num_classes) *
                                         height * width,
                                     1.0 / num_classes));
}

LabelMask ProbMap::Argmax() const {
  const std::size_t plane = plane_size();
  std::vector<std::uint8_t> labels(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int k = 1; k < num_classes_; ++k) {
      if (probs_[k * plane + p] > probs_[best * plane + p]) best = k;
    }
    labels[p] = static_cast<std::uint8_t>(best);
  }
  return LabelMask(height_, width_, num_classes_, std::move(labels));
}

const Click &ClickSet::Add(int row, int col, int class_label) {
  if (Contains(row, col))
    throw Error(ErrorCode::kDuplicateClick,
                "pixel (" + std::to_string(row) + "," + std::to_string(col) +
                    ") already clicked");
  clicks_.push_back(Click{row, col, class_label,
                          static_cast<int>(clicks_.size()) + 1});
  return clicks_.back();
}

bool ClickSet::Contains(int row, int col) const {
  return std::any_of(clicks_.begin(), clicks_.end(), [&](const Click &c) {
    return c.row == row && c.col == col;
  });
}

ClickSet ClickSet::Prefix(std::size_t n) const {
  ClickSet out;
  for (std::size_t i = 0; i < std::min(n, clicks_.size()); ++i)
    out.clicks_.push_back(clicks_[i]);
  return out;
}

void ValidatePair(const Image &image, const LabelMask &mask) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw Error(ErrorCode::kShapeMismatch,
                "image " + std::to_string(image.height()) + "x" +
                    std::to_string(image.width()) + " vs mask " +
                    std::to_string(mask.height()) + "x" +
                    std::to_string(mask.width()));
  for (std::uint8_t v : mask.labels()) {
    if (v >= mask.num_classes())
      throw Error(ErrorCode::kLabelOutOfRange, "mask label");
  }
}

void ValidateClicks(std::span<const Click> clicks, int height, int width,
                    int num_classes) {
  for (const Click &c : clicks) {
    if (c.row < 0 || c.row >= height || c.col < 0 || c.col >= width)
      throw Error(ErrorCode::kOutOfBounds,
                  "click (" + std::to_string(c.row) + "," +
                      std::to_string(c.col) + ") outside " +
                      std::to_string(height) + "x" + std::to_string(width));
    if (c.class_label < 0 || c.class_label >= num_classes)
      throw Error(ErrorCode::kLabelOutOfRange, "click class");
  }
}

bool IsWellFormed(const ClickSet &clicks) {
  for (std::size_t i = 0; i < clicks.size(); ++i) {
    if (clicks[i].ordinal != static_cast<int>(i) + 1) return false;
    for (std::size_t j = 0; j < i; ++j) {
      if (clicks[i].row == clicks[j].row && clicks[i].col == clicks[j].col)
        return false;
    }
  }
  return true;
}

bool IsNormalized(const ProbMap &probs, double tolerance) {
  const std::size_t plane = probs.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    double total = 0.0;
    for (int k = 0; k < probs.num_classes(); ++k) {
      double v = probs.at_index(k, p);
      if (!(v >= 0.0 && v <= 1.0)) return false;
      total += v;
    }
    if (std::abs(total - 1.0) > tolerance) return false;
  }
  return true;
}

}  // namespace clickadapt
