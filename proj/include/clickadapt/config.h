// clickadapt/include/clickadapt/config.h

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

#ifndef CLICKADAPT_CONFIG_H_
#define CLICKADAPT_CONFIG_H_

#include <cstdint>
#include <string>

#include "json.hpp"

namespace clickadapt {

// Which loss terms participate in each adaptation phase. Field names follow
// the ablation grid: mid-interaction Dice-Focal / CCG, post-interaction
// stage-2 Dice-Focal / CCG, and post-interaction stage 1.
struct AdaptationToggles {
  bool dfl_mi = true;
  bool ccgl_mi = true;
  bool dfl_pi = true;
  bool ccgl_pi = true;
  bool s1_pi = true;

  bool mid_interaction() const { return dfl_mi || ccgl_mi; }
  bool stage2() const { return dfl_pi || ccgl_pi; }
  bool any() const { return mid_interaction() || stage2() || s1_pi; }

  static AdaptationToggles AllOff() { return {false, false, false, false, false}; }
  static AdaptationToggles PostOnly() { return {false, false, true, true, true}; }

  // Five characters, 'x' for on and '-' for off, in field order.
  std::string Tag() const;
  static AdaptationToggles FromTag(const std::string &tag);

  bool operator==(const AdaptationToggles &) const = default;
};

struct AdaptationConfig {
  double alpha = 0.7;           // Dice-Focal mixing weight
  double beta = 200.0;          // CCG weight in the total loss
  double sigma = 3.0;           // CCG Gaussian std (pixels)
  double guidance_sigma = 3.0;  // click-map smoothing std (pixels)
  double focal_gamma = 2.0;
  double lr_pretrain = 1e-3;
  double lr_mi = 1e-4;
  double lr_pi = 1e-4;
  int clicks_per_image = 10;    // interaction budget T
  int max_train_clicks = 10;    // upper end of the training click count draw
  AdaptationToggles toggles;
  std::uint64_t rng_seed = 0;
  // Pretraining forwards the localization click together with the sampled
  // correction clicks.
  bool pretrain_keep_localization = true;

  // Throws Error(kConfig) when a field is out of range.
  void Validate() const;

  bool operator==(const AdaptationConfig &) const = default;
};

void to_json(nlohmann::json &j, const AdaptationToggles &t);
void from_json(const nlohmann::json &j, AdaptationToggles &t);
void to_json(nlohmann::json &j, const AdaptationConfig &c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json &j, AdaptationConfig &c);

}  // namespace clickadapt

#endif  // CLICKADAPT_CONFIG_H_
