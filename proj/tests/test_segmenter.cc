// clickadapt/tests/test_segmenter.cc

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
#include <cstring>
#include <filesystem>

#include "clickadapt/encoding.h"
#include "clickadapt/segmenter.h"
#include "common.h"
#include "doctest.h"
#include "oracles.h"
#include "unet.h"

using namespace clickadapt;

namespace {

ErrorCode CodeOf(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  return ErrorCode::kNoError;
}

std::vector<std::vector<double>> ToDouble(const ModelParams &params) {
  std::vector<std::vector<double>> out;
  for (const ParamArray &a : params.arrays()) out.emplace_back(a.values.begin(), a.values.end());
  return out;
}

nn::Tensor<double> InputTensor(const Image &image, const ClickSet &clicks, const ModelSpec &spec) {
  const GuidanceStack g =
      EncodeClicks(clicks, image.height(), image.width(), spec.num_classes, spec.guidance_sigma);
  const std::vector<float> x = AssembleInput(image, g);
  nn::Tensor<double> t(spec.in_channels(), image.height(), image.width());
  std::copy(x.begin(), x.end(), t.v.begin());
  return t;
}

// sum(logits * weights) for the double-precision graph.
double Objective(const std::vector<std::vector<double>> &values, const nn::Tensor<double> &input,
                 const ModelSpec &spec, const std::vector<double> &weights) {
  nn::Graph<double> g(values, false);
  const int out = unet::Build(g, spec, g.Input(input));
  double s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += g.value(out).v[i] * weights[i];
  return s;
}

}  // namespace

TEST_CASE("initialization is seeded and follows the layout") {
  const ModelSpec spec;
  const ModelParams a = ModelParams::Initialize(spec, 5);
  CHECK(a == ModelParams::Initialize(spec, 5));
  CHECK_FALSE(a == ModelParams::Initialize(spec, 6));
  const auto layout = unet::Layout(spec);
  REQUIRE(a.arrays().size() == layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ParamArray &arr = a.arrays()[i];
    CHECK(arr.name == layout[i].name);
    CHECK(arr.shape == layout[i].shape);
    if (layout[i].kind == unet::ParamKind::kScale) {
      for (float v : arr.values) CHECK(v == 1.0f);
    } else if (layout[i].kind == unet::ParamKind::kBias) {
      for (float v : arr.values) CHECK(v == 0.0f);
    } else {
      const float bound = static_cast<float>(std::sqrt(6.0 / layout[i].fan_in));
      for (float v : arr.values) CHECK(std::abs(v) <= bound);
    }
  }
  CHECK(a.version() == 0);
  CHECK(a.AllFinite());
}

TEST_CASE("model shape validation and diff") {
  ModelSpec spec;
  spec.depth = 0;
  CHECK(CodeOf([&] { spec.Validate(); }) == ErrorCode::kConfig);
  ModelSpec other;
  other.base_channels = 16;
  CHECK(ModelSpec().Diff(ModelSpec()).empty());
  CHECK(ModelSpec().Diff(other).find("base_channels") != std::string::npos);
}

TEST_CASE("forward pass is deterministic and normalized") {
  Rng rng(1);
  const ModelParams params = ModelParams::Initialize(ModelSpec(), 3);
  const Image image = testing::RandomImage(1, 32, 32, rng);
  ClickSet clicks;
  clicks.Add(10, 12, 1);
  const ProbMap a = Predict(image, clicks, params);
  CHECK(a == Predict(image, clicks, params));
  CHECK(a == PredictTracked(image, clicks, params).probs());
  CHECK(IsNormalized(a));
  CHECK(a.num_classes() == 2);
  CHECK(a.height() == 32);
}

TEST_CASE("forward rejects images that do not fit the model") {
  Rng rng(1);
  const ModelParams params = ModelParams::Initialize(ModelSpec(), 3);
  const ClickSet none;
  CHECK(CodeOf([&] { Predict(testing::RandomImage(1, 30, 32, rng), none, params); }) ==
        ErrorCode::kShapeMismatch);
  CHECK(CodeOf([&] { Predict(testing::RandomImage(3, 32, 32, rng), none, params); }) ==
        ErrorCode::kShapeMismatch);
  CHECK(CodeOf([&] { Predict(testing::RandomImage(1, 32, 32, rng), none, ModelParams()); }) ==
        ErrorCode::kNoModelLoaded);
}

TEST_CASE("network parameter gradients match finite differences in double precision") {
  Rng rng(17);
  ModelSpec spec = testing::TinySpec(3);
  spec.depth = 2;
  const ModelParams params = ModelParams::Initialize(spec, 11);
  const Image image = testing::RandomImage(1, 8, 8, rng);
  ClickSet clicks;
  clicks.Add(2, 3, 1);
  clicks.Add(5, 6, 2);
  const nn::Tensor<double> input = InputTensor(image, clicks, spec);
  std::vector<std::vector<double>> values = ToDouble(params);

  nn::Graph<double> g(values, true);
  const int out = unet::Build(g, spec, g.Input(input));
  nn::Tensor<double> seed(spec.num_classes, 8, 8);
  for (double &v : seed.v) v = rng.Normal();
  std::vector<std::vector<double>> grads;
  g.Backward(out, seed, &grads);

  double worst = 0.0;
  int checked = 0;
  for (std::size_t a = 0; a < values.size(); ++a) {
    for (int probe = 0; probe < 4; ++probe) {
      const std::size_t j = rng.Below(values[a].size());
      const double saved = values[a][j];
      const double h = 1e-6;
      values[a][j] = saved + h;
      const double up = Objective(values, input, spec, seed.v);
      values[a][j] = saved - h;
      const double down = Objective(values, input, spec, seed.v);
      values[a][j] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[a][j];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
      ++checked;
    }
  }
  CHECK(checked == 4 * static_cast<int>(values.size()));
  CHECK(worst < 1e-4);
}

TEST_CASE("float gradients agree with the double-precision graph") {
  Rng rng(19);
  const ModelSpec spec = testing::TinySpec();
  const ModelParams params = ModelParams::Initialize(spec, 2);
  const Image image = testing::RandomImage(1, 16, 16, rng);
  ClickSet clicks;
  clicks.Add(7, 7, 1);
  const TrackedPrediction tracked = PredictTracked(image, clicks, params);
  const std::vector<double> seed = testing::RandomLogits(2, 16, 16, rng, 1.0);
  const auto grads = ParameterGradients(tracked, seed);

  nn::Graph<double> g(ToDouble(params), true);
  const int out = unet::Build(g, spec, g.Input(InputTensor(image, clicks, spec)));
  nn::Tensor<double> s(2, 16, 16);
  s.v = seed;
  std::vector<std::vector<double>> ref;
  g.Backward(out, s, &ref);
  for (std::size_t a = 0; a < ref.size(); ++a) {
    double norm = 0, diff = 0;
    for (std::size_t j = 0; j < ref[a].size(); ++j) {
      norm += ref[a][j] * ref[a][j];
      diff += (ref[a][j] - grads[a][j]) * (ref[a][j] - grads[a][j]);
    }
    CHECK(std::sqrt(diff) <= 1e-3 * std::sqrt(norm) + 1e-9);
  }
}

TEST_CASE("every parameter array receives gradient") {
  Rng rng(23);
  const ModelSpec spec;
  const ModelParams params = ModelParams::Initialize(spec, 4);
  const Image image = testing::RandomImage(1, 32, 32, rng);
  ClickSet clicks;
  clicks.Add(9, 9, 1);
  clicks.Add(20, 25, 0);
  const TrackedPrediction tracked = PredictTracked(image, clicks, params);
  const LabelMask y = testing::RandomBlobMask(32, 32, 2, rng);
  const LossValue loss = TotalLoss(tracked.probs(), y, clicks.clicks(), AdaptationConfig(), true, true);
  const auto grads = ParameterGradients(tracked, loss.grad_logits);
  REQUIRE(grads.size() == params.arrays().size());
  for (std::size_t a = 0; a < grads.size(); ++a) {
    double mag = 0;
    for (float v : grads[a]) mag += std::abs(v);
    INFO(params.arrays()[a].name);
    CHECK(mag > 0.0);
  }
}

TEST_CASE("first adam step moves each weight by lr times the gradient sign") {
  Rng rng(29);
  const ModelSpec spec = testing::TinySpec();
  ModelParams params = ModelParams::Initialize(spec, 8);
  const ModelParams before = params;
  const Image image = testing::RandomImage(1, 16, 16, rng);
  ClickSet clicks;
  clicks.Add(4, 4, 1);
  const TrackedPrediction tracked = PredictTracked(image, clicks, params);
  const LabelMask y = testing::RandomBlobMask(16, 16, 2, rng);
  const LossValue loss = TotalLoss(tracked.probs(), y, clicks.clicks(), AdaptationConfig(), true, true);
  const auto grads = ParameterGradients(tracked, loss.grad_logits);
  OptimizerState opt = OptimizerState::Fresh(params, 1e-3);
  UpdateStep(params, opt, tracked, loss);
  CHECK(params.version() == 1);
  CHECK(opt.step == 1);
  for (std::size_t a = 0; a < grads.size(); ++a) {
    for (std::size_t j = 0; j < grads[a].size(); ++j) {
      const double g = grads[a][j];
      const double expected = before.arrays()[a].values[j] - 1e-3 * g / (std::abs(g) + 1e-8);
      CHECK(params.arrays()[a].values[j] == doctest::Approx(expected).epsilon(1e-5));
    }
  }
}

TEST_CASE("update step rejects stale lineage and non-finite gradients") {
  Rng rng(31);
  const ModelSpec spec = testing::TinySpec();
  ModelParams params = ModelParams::Initialize(spec, 8);
  const Image image = testing::RandomImage(1, 16, 16, rng);
  ClickSet clicks;
  clicks.Add(4, 4, 1);
  const LabelMask y = testing::RandomBlobMask(16, 16, 2, rng);
  OptimizerState opt = OptimizerState::Fresh(params, 1e-3);

  const TrackedPrediction stale = PredictTracked(image, clicks, params);
  const LossValue loss = TotalLoss(stale.probs(), y, clicks.clicks(), AdaptationConfig(), true, true);
  UpdateStep(params, opt, stale, loss);
  CHECK(CodeOf([&] { UpdateStep(params, opt, stale, loss); }) == ErrorCode::kInvalidArgument);

  const TrackedPrediction fresh = PredictTracked(image, clicks, params);
  LossValue bad = TotalLoss(fresh.probs(), y, clicks.clicks(), AdaptationConfig(), true, true);
  bad.grad_logits[3] = std::nan("");
  const ModelParams snapshot = params;
  const OptimizerState opt_snapshot = opt;
  CHECK(CodeOf([&] { UpdateStep(params, opt, fresh, bad); }) == ErrorCode::kNonFiniteGradient);
  CHECK(params == snapshot);
  CHECK(opt.step == opt_snapshot.step);
  CHECK(opt.m == opt_snapshot.m);
}

TEST_CASE("checkpoints round trip and detect corruption") {
  Rng rng(37);
  const ModelSpec spec = testing::TinySpec();
  ModelParams params = ModelParams::Initialize(spec, 9);
  const Image image = testing::RandomImage(1, 16, 16, rng);
  ClickSet clicks;
  clicks.Add(4, 4, 1);
  OptimizerState opt = OptimizerState::Fresh(params, 1e-3);
  for (int i = 0; i < 3; ++i) {
    const TrackedPrediction t = PredictTracked(image, clicks, params);
    UpdateStep(params, opt, t,
               TotalLoss(t.probs(), testing::RandomBlobMask(16, 16, 2, rng), clicks.clicks(),
                         AdaptationConfig(), true, true));
  }
  const std::vector<std::uint8_t> blob = Snapshot(params);
  const ModelParams back = Restore(blob);
  CHECK(back == params);
  CHECK(back.version() == 3);
  CHECK(Snapshot(back) == blob);
  CHECK(Predict(image, clicks, back) == Predict(image, clicks, params));

  CHECK(CodeOf([&] { Restore(std::span(blob).first(blob.size() - 9)); }) ==
        ErrorCode::kCorruptCheckpoint);
  CHECK(CodeOf([&] { Restore(std::span(blob).first(5)); }) == ErrorCode::kCorruptCheckpoint);
  for (std::size_t pos : {std::size_t(0), std::size_t(20), blob.size() / 2, blob.size() - 1}) {
    std::vector<std::uint8_t> flipped = blob;
    flipped[pos] ^= 0x40;
    CHECK(CodeOf([&] { Restore(flipped); }) == ErrorCode::kCorruptCheckpoint);
  }
  ModelSpec other = spec;
  other.base_channels = 8;
  CHECK(CodeOf([&] { Restore(blob, other); }) == ErrorCode::kCorruptCheckpoint);
  CHECK(Restore(blob, spec) == params);

  const auto path = std::filesystem::temp_directory_path() / "clickadapt_test_ckpt.bin";
  SaveCheckpoint(path, params);
  CHECK(LoadCheckpoint(path) == params);
  std::filesystem::remove(path);
  CHECK(CodeOf([&] { LoadCheckpoint(path); }) != ErrorCode::kNoError);
}
