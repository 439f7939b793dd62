// clickadapt/tests/test_core.cc

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

#include <cmath>

#include "clickadapt/config.h"
#include "clickadapt/rng.h"
#include "clickadapt/types.h"
#include "common.h"
#include "doctest.h"

using namespace clickadapt;

namespace {

template <typename F>
ErrorCode CodeOf(F &&f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("rng matches reference xoshiro256** sequence") {
  Rng a(0);
  CHECK(a.NextU64() == 0x99ec5f36cb75f2b4ULL);
  CHECK(a.NextU64() == 0xbf6e1f784956452aULL);
  CHECK(a.NextU64() == 0x1a5f849d4933e6e0ULL);
  Rng b(42);
  CHECK(b.NextU64() == 0x15780b2e0c2ec716ULL);
  CHECK(b.NextU64() == 0x6104d9866d113a7eULL);
  CHECK(b.NextU64() == 0xae17533239e499a1ULL);
}

TEST_CASE("rng forks are independent of parent draws") {
  Rng a(7);
  const Rng before = a.Fork(3);
  Rng f1 = before;
  Rng f2 = a.Fork(3);
  CHECK(f1.NextU64() == f2.NextU64());
  CHECK(a.Fork(3).NextU64() != a.Fork(4).NextU64());
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const int v = u.UniformInt(-2, 3);
    CHECK(v >= -2);
    CHECK(v <= 3);
    const double x = u.Uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("click set keeps unique positions and contiguous ordinals") {
  ClickSet set;
  CHECK(set.Add(1, 2, 1).ordinal == 1);
  CHECK(set.Add(3, 4, 0).ordinal == 2);
  CHECK(CodeOf([&] { set.Add(1, 2, 0); }) == ErrorCode::kDuplicateClick);
  CHECK(set.size() == 2);
  CHECK(IsWellFormed(set));
  CHECK(set.Contains(3, 4));
  CHECK_FALSE(set.Contains(4, 3));
  const ClickSet prefix = set.Prefix(1);
  CHECK(prefix.size() == 1);
  CHECK(IsWellFormed(prefix));
  ClickSet copy;
  copy.Add(set[1]);
  CHECK(copy[0].ordinal == 1);
}

TEST_CASE("validation reports stable codes") {
  CHECK(CodeOf([] { ValidateClicks(std::vector<Click>{{5, 0, 1, 1}}, 4, 4, 2); }) ==
        ErrorCode::kOutOfBounds);
  CHECK(CodeOf([] { ValidateClicks(std::vector<Click>{{0, 0, 2, 1}}, 4, 4, 2); }) ==
        ErrorCode::kLabelOutOfRange);
  CHECK(CodeOf([] {
          ValidatePair(Image::Filled(1, 8, 8, 0.f), LabelMask::Filled(8, 9, 2, 0));
        }) == ErrorCode::kShapeMismatch);
  CHECK(CodeOf([] { LabelMask(2, 2, 2, {0, 1, 2, 0}); }) == ErrorCode::kLabelOutOfRange);
  CHECK(CodeOf([] { Image(1, 8, 8, std::vector<float>(63, 0.f)); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("prob map normalization and argmax ties") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const ProbMap p = testing::RandomProbs(3, 5, 4, rng, 30.0);
    CHECK(IsNormalized(p));
  }
  const ProbMap tie = ProbMap::Uniform(3, 2, 2);
  CHECK(tie.Argmax() == LabelMask::Filled(2, 2, 3, 0));
  const LabelMask m = LabelMask::FromRows({{0, 1}, {2, 1}}, 3);
  CHECK(ProbMap::OneHot(m).Argmax() == m);
  CHECK(m.WithLabel(0, 0, 2).at(0, 0) == 2);
  CHECK(m.at(0, 0) == 0);
}

TEST_CASE("softmax of extreme logits stays finite") {
  const std::vector<double> z = {1000.0, -1000.0, 0.0, 0.0};
  const ProbMap p = ProbMap::FromLogits(2, 1, 2, z);
  CHECK(p.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(p.at(1, 0, 0) == doctest::Approx(0.0));
  CHECK(p.at(1, 0, 1) == doctest::Approx(1.0));
  CHECK(p.at(0, 0, 1) == doctest::Approx(0.0));
  CHECK(IsNormalized(p));
  CHECK(CodeOf([] { Image(1, 4, 8, std::vector<float>(32, 0.f)); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("toggle tags round trip") {
  for (int bits = 0; bits < 32; ++bits) {
    AdaptationToggles t{bool(bits & 1), bool(bits & 2), bool(bits & 4), bool(bits & 8),
                        bool(bits & 16)};
    CHECK(AdaptationToggles::FromTag(t.Tag()) == t);
  }
  CHECK(AdaptationToggles::PostOnly().Tag() == "--xxx");
  CHECK(CodeOf([] { AdaptationToggles::FromTag("xx"); }) == ErrorCode::kConfig);
}

TEST_CASE("config json round trip rejects unknown keys") {
  AdaptationConfig cfg;
  cfg.beta = 50.0;
  cfg.toggles = AdaptationToggles::PostOnly();
  cfg.rng_seed = 9;
  const nlohmann::json j = cfg;
  CHECK(j.get<AdaptationConfig>() == cfg);

  const AdaptationConfig partial = nlohmann::json{{"alpha", 0.5}}.get<AdaptationConfig>();
  CHECK(partial.alpha == 0.5);
  CHECK(partial.beta == 200.0);
  CHECK(CodeOf([] { nlohmann::json{{"alpah", 0.5}}.get<AdaptationConfig>(); }) ==
        ErrorCode::kConfig);
}

TEST_CASE("config defaults and range checks") {
  const AdaptationConfig cfg;
  CHECK(cfg.alpha == 0.7);
  CHECK(cfg.beta == 200.0);
  CHECK(cfg.sigma == 3.0);
  CHECK(cfg.lr_mi == 1e-4);
  CHECK(cfg.lr_pi == 1e-4);
  CHECK(cfg.clicks_per_image == 10);
  cfg.Validate();
  AdaptationConfig bad = cfg;
  bad.alpha = 1.5;
  CHECK(CodeOf([&] { bad.Validate(); }) == ErrorCode::kConfig);
  bad = cfg;
  bad.sigma = 0.0;
  CHECK(CodeOf([&] { bad.Validate(); }) == ErrorCode::kConfig);
  bad = cfg;
  bad.clicks_per_image = 0;
  CHECK(CodeOf([&] { bad.Validate(); }) == ErrorCode::kConfig);
}
