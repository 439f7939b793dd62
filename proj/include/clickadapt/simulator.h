// clickadapt/include/clickadapt/simulator.h

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

#ifndef CLICKADAPT_SIMULATOR_H_
#define CLICKADAPT_SIMULATOR_H_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clickadapt/rng.h"
#include "clickadapt/types.h"

namespace clickadapt {

// A 4-connected region where prediction and reference disagree.
struct ErrorComponent {
  enum class Kind { kFalsePositive, kFalseNegative };

  std::vector<std::pair<int, int>> pixels;  // (row, col), discovery order
  int size = 0;
  int correct_class = 0;  // majority reference class, lowest on ties
  Kind kind = Kind::kFalseNegative;  // false positive iff correct_class == 0
};

// Components of pred != ref, largest first. Equal sizes keep the row-major
// order of each component's first pixel.
std::vector<ErrorComponent> ErrorComponents(const LabelMask &pred,
                                            const LabelMask &ref);

// Uniform over all foreground (non-zero) pixels of `gt`. Throws
// kEmptyForeground.
Click LocalizationClick(const LabelMask &gt, Rng &rng);

// One uniformly placed click per error component in rank order, at most k.
// Pixels already present in `taken` are never chosen; a component with no
// free pixel is skipped. Each click's class is gt at its pixel.
ClickSet TrainingClicks(const LabelMask &pred, const LabelMask &gt, int k,
                        Rng &rng, const ClickSet *taken = nullptr);

// Uniform on [1, t_max].
int SampleK(Rng &rng, int t_max = 10);

// Uniform pixel in the largest error component that has a pixel not in
// `taken`. Throws kNoError when no such component remains.
Click CorrectionClick(const LabelMask &pred, const LabelMask &ref, Rng &rng,
                      const ClickSet *taken = nullptr);

// TrainingClicks with p_final as the reference and the stage 1 mask as the
// prediction, capped at t. Empty when the two masks agree.
ClickSet PiArtificialClicks(const LabelMask &p1, const LabelMask &p_final,
                            int t, Rng &rng);

// Ways of injecting wrong clicks into a simulated user.
struct NoiseMode {
  enum class Kind { kNone, kFractionWrong, kFirstNWrong, kImageFractionWrong };

  Kind kind = Kind::kNone;
  double p = 0.0;  // kFractionWrong: per-click probability
  int n = 0;       // kFirstNWrong: corrections 1..n of every image
  double q = 0.0;  // kImageFractionWrong: per-image probability

  static NoiseMode None() { return {}; }
  static NoiseMode FractionWrong(double p) { return {Kind::kFractionWrong, p, 0, 0.0}; }
  static NoiseMode FirstNWrong(int n) { return {Kind::kFirstNWrong, 0.0, n, 0.0}; }
  static NoiseMode ImageFractionWrong(double q) {
    return {Kind::kImageFractionWrong, 0.0, 0, q};
  }
  // "none", "p=0.4", "first=4", "images=0.4".
  static NoiseMode Parse(const std::string &text);
  std::string ToString() const;
};

// Moves a click to a uniformly chosen pixel where pred == ref that is free in
// `taken`, labelled with a class that is wrong there: the other class when
// K = 2, a uniformly drawn wrong class otherwise. If every pixel is wrongly
// predicted or taken, the position is kept and only the class changes.
Click CorruptClick(const Click &click, const LabelMask &pred,
                   const LabelMask &ref, Rng &rng,
                   const ClickSet *taken = nullptr);

// Stateful selector deciding which clicks of a stream become wrong.
class ClickCorruptor {
 public:
  ClickCorruptor(NoiseMode mode, Rng rng) : mode_(mode), rng_(rng) {}

  // Starts a new image; draws the per-image decision for image-level modes.
  void BeginImage();
  // Whether the `index`-th correction click (1-based) of the current image
  // should be corrupted. Localization clicks are never passed here.
  bool ShouldCorrupt(int index);
  Rng &rng() { return rng_; }
  const NoiseMode &mode() const { return mode_; }

 private:
  NoiseMode mode_;
  Rng rng_;
  bool image_wrong_ = false;
};

// Applies the mode to a fixed list of clicks against one prediction, every
// click being eligible. Returns the stream and writes how many were changed.
std::vector<Click> CorruptClicks(std::span<const Click> clicks,
                                 const LabelMask &pred, const LabelMask &ref,
                                 const NoiseMode &mode, Rng &rng,
                                 int *num_corrupted = nullptr);

}  // namespace clickadapt

#endif  // CLICKADAPT_SIMULATOR_H_
