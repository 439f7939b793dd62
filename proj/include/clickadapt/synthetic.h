// clickadapt/include/clickadapt/synthetic.h

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

#ifndef CLICKADAPT_SYNTHETIC_H_
#define CLICKADAPT_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "clickadapt/engine.h"
#include "json.hpp"

namespace clickadapt {

// Pixel-only transform applied after rendering; masks are never touched.
struct ShiftTransform {
  enum class Kind { kInvert, kGamma, kContrast, kNoise, kBiasField };
  Kind kind = Kind::kInvert;
  double value = 0.0;  // gamma exponent, contrast gain, noise std, bias slope

  bool operator==(const ShiftTransform &) const = default;
};

struct SyntheticDomainSpec {
  std::string name = "source";
  // "ellipses", "polygons", or "ring-cup" (K = 3: ring is class 1, cup 2).
  std::string family = "ellipses";
  int size = 64;
  int num_classes = 2;
  int count = 200;
  int channels = 1;
  std::uint64_t seed = 0;
  double object_intensity = 0.6;
  double background_intensity = 0.4;
  double intensity_jitter = 0.08;
  double texture_noise = 0.15;
  int distractors = 2;  // unlabelled shapes of the same family
  double distractor_intensity = -1.0;  // negative: drawn like the target
  std::vector<ShiftTransform> shift;

  void Validate() const;
  bool operator==(const SyntheticDomainSpec &) const = default;
};

void to_json(nlohmann::json &j, const ShiftTransform &t);
void from_json(const nlohmann::json &j, ShiftTransform &t);
void to_json(nlohmann::json &j, const SyntheticDomainSpec &s);
void from_json(const nlohmann::json &j, SyntheticDomainSpec &s);

// Seeded and reproducible; sample i depends only on (spec, i).
std::vector<Sample> GenerateDomain(const SyntheticDomainSpec &spec);

// Applies the chain in order, clamping to [0, 1] after each step.
Image ApplyShift(const Image &image, const std::vector<ShiftTransform> &chain,
                 Rng &rng);

// Named presets used by the CLI and the acceptance experiment: "source",
// "inverted" (invert + noise), "gamma" (gamma + contrast), "bias"
// (bias field + noise).
SyntheticDomainSpec PresetDomain(const std::string &name, int count,
                                 std::uint64_t seed, int num_classes = 2);

}  // namespace clickadapt

#endif  // CLICKADAPT_SYNTHETIC_H_
