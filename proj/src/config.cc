// clickadapt/src/config.cc

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

#include "clickadapt/config.h"

#include <set>

#include "clickadapt/errors.h"

namespace clickadapt {

std::string AdaptationToggles::Tag() const {
  std::string tag;
  for (bool b : {dfl_mi, ccgl_mi, dfl_pi, ccgl_pi, s1_pi}) tag += b ? 'x' : '-';
  return tag;
}

AdaptationToggles AdaptationToggles::FromTag(const std::string &tag) {
  if (tag.size() != 5 || tag.find_first_not_of("x-") != std::string::npos)
    throw Error(ErrorCode::kConfig, "toggle tag must be 5 chars of 'x'/'-': " + tag);
  return {tag[0] == 'x', tag[1] == 'x', tag[2] == 'x', tag[3] == 'x',
          tag[4] == 'x'};
}

void AdaptationConfig::Validate() const {
  auto fail = [](const std::string &what) {
    throw Error(ErrorCode::kConfig, what);
  };
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must be in [0,1]");
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  if (!(sigma > 0.0)) fail("sigma must be > 0");
  if (!(guidance_sigma > 0.0)) fail("guidance_sigma must be > 0");
  if (!(focal_gamma >= 0.0)) fail("focal_gamma must be >= 0");
  if (!(lr_pretrain > 0.0) || !(lr_mi > 0.0) || !(lr_pi > 0.0))
    fail("learning rates must be > 0");
  if (clicks_per_image < 1) fail("clicks_per_image must be >= 1");
  if (max_train_clicks < 1) fail("max_train_clicks must be >= 1");
}

void to_json(nlohmann::json &j, const AdaptationToggles &t) {
  j = {{"dfl_mi", t.dfl_mi}, {"ccgl_mi", t.ccgl_mi}, {"dfl_pi", t.dfl_pi},
       {"ccgl_pi", t.ccgl_pi}, {"s1_pi", t.s1_pi}};
}

void from_json(const nlohmann::json &j, AdaptationToggles &t) {
  if (j.is_string()) {
    t = AdaptationToggles::FromTag(j.get<std::string>());
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string &k = it.key();
    bool v = it.value().get<bool>();
    if (k == "dfl_mi") t.dfl_mi = v;
    else if (k == "ccgl_mi") t.ccgl_mi = v;
    else if (k == "dfl_pi") t.dfl_pi = v;
    else if (k == "ccgl_pi") t.ccgl_pi = v;
    else if (k == "s1_pi") t.s1_pi = v;
    else throw Error(ErrorCode::kConfig, "unknown toggle: " + k);
  }
}

void to_json(nlohmann::json &j, const AdaptationConfig &c) {
  j = {{"alpha", c.alpha},
       {"beta", c.beta},
       {"sigma", c.sigma},
       {"guidance_sigma", c.guidance_sigma},
       {"focal_gamma", c.focal_gamma},
       {"lr_pretrain", c.lr_pretrain},
       {"lr_mi", c.lr_mi},
       {"lr_pi", c.lr_pi},
       {"clicks_per_image", c.clicks_per_image},
       {"max_train_clicks", c.max_train_clicks},
       {"toggles", c.toggles},
       {"rng_seed", c.rng_seed},
       {"pretrain_keep_localization", c.pretrain_keep_localization}};
}

void from_json(const nlohmann::json &j, AdaptationConfig &c) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string &k = it.key();
      const auto &v = it.value();
      if (k == "alpha") c.alpha = v.get<double>();
      else if (k == "beta") c.beta = v.get<double>();
      else if (k == "sigma") c.sigma = v.get<double>();
      else if (k == "guidance_sigma") c.guidance_sigma = v.get<double>();
      else if (k == "focal_gamma") c.focal_gamma = v.get<double>();
      else if (k == "lr_pretrain") c.lr_pretrain = v.get<double>();
      else if (k == "lr_mi") c.lr_mi = v.get<double>();
      else if (k == "lr_pi") c.lr_pi = v.get<double>();
      else if (k == "clicks_per_image" || k == "T") c.clicks_per_image = v.get<int>();
      else if (k == "max_train_clicks") c.max_train_clicks = v.get<int>();
      else if (k == "toggles") c.toggles = v.get<AdaptationToggles>();
      else if (k == "rng_seed") c.rng_seed = v.get<std::uint64_t>();
      else if (k == "pretrain_keep_localization") c.pretrain_keep_localization = v.get<bool>();
      else throw Error(ErrorCode::kConfig, "unknown config key: " + k);
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

}  // namespace clickadapt
