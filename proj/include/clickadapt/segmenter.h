// clickadapt/include/clickadapt/segmenter.h

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

#ifndef CLICKADAPT_SEGMENTER_H_
#define CLICKADAPT_SEGMENTER_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "clickadapt/losses.h"
#include "clickadapt/types.h"
#include "json.hpp"

namespace clickadapt {

struct OptimizerState;
class TrackedPrediction;

// Shape of the click-conditioned encoder-decoder. Input spatial extents must
// be divisible by 2^depth.
struct ModelSpec {
  int depth = 2;
  int base_channels = 8;
  int image_channels = 1;
  int num_classes = 2;
  double guidance_sigma = 3.0;  // click-map smoothing the model was built for

  int in_channels() const { return image_channels + num_classes; }
  int out_channels() const { return num_classes; }
  void Validate() const;
  // Human-readable list of differing fields; empty when equal.
  std::string Diff(const ModelSpec &other) const;

  bool operator==(const ModelSpec &) const = default;
};

void to_json(nlohmann::json &j, const ModelSpec &s);
void from_json(const nlohmann::json &j, ModelSpec &s);

struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  bool operator==(const ParamArray &) const = default;
};

// Named parameter arrays plus a version counter bumped by every update.
class ModelParams {
 public:
  ModelParams() = default;
  // He-uniform convolution weights, unit norm scales, zero biases.
  static ModelParams Initialize(const ModelSpec &spec, std::uint64_t seed);

  const ModelSpec &spec() const { return spec_; }
  std::uint64_t version() const { return version_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<ParamArray> &arrays() const { return arrays_; }
  std::size_t num_values() const;
  bool AllFinite() const;

  bool operator==(const ModelParams &) const = default;

 private:
  friend void UpdateStep(ModelParams &, OptimizerState &,
                         const TrackedPrediction &, const LossValue &);
  friend ModelParams Restore(std::span<const std::uint8_t> blob);

  ModelSpec spec_;
  std::uint64_t version_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<ParamArray> arrays_;
};

// Adam moments; created fresh for every training or adaptation phase.
struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  static OptimizerState Fresh(const ModelParams &params, double lr);
};

namespace detail {
struct ForwardRecord;
}

// A forward pass that kept its differentiation lineage.
class TrackedPrediction {
 public:
  const ProbMap &probs() const { return probs_; }
  std::uint64_t params_version() const { return params_version_; }

 private:
  friend TrackedPrediction PredictTracked(const Image &, std::span<const Click>,
                                          const ModelParams &);
  friend std::vector<std::vector<float>> ParameterGradients(
      const TrackedPrediction &, std::span<const double>);

  ProbMap probs_;
  std::uint64_t params_version_ = 0;
  std::shared_ptr<const detail::ForwardRecord> record_;
};

// Deterministic forward pass without lineage. Throws kShapeMismatch if the
// image does not fit the ModelSpec.
ProbMap Predict(const Image &image, std::span<const Click> clicks,
                const ModelParams &params);
inline ProbMap Predict(const Image &image, const ClickSet &clicks,
                       const ModelParams &params) {
  return Predict(image, clicks.clicks(), params);
}

TrackedPrediction PredictTracked(const Image &image,
                                 std::span<const Click> clicks,
                                 const ModelParams &params);
inline TrackedPrediction PredictTracked(const Image &image,
                                        const ClickSet &clicks,
                                        const ModelParams &params) {
  return PredictTracked(image, clicks.clicks(), params);
}

// dLoss/dParams for a loss whose logit gradient is `grad_logits`.
std::vector<std::vector<float>> ParameterGradients(
    const TrackedPrediction &prediction, std::span<const double> grad_logits);

// One Adam step over every parameter using the loss gradient. The lineage
// must come from the current parameter version. On a non-finite gradient
// throws kNonFiniteGradient and leaves params and optimizer untouched.
void UpdateStep(ModelParams &params, OptimizerState &opt,
                const TrackedPrediction &prediction, const LossValue &loss);

// Self-describing binary checkpoint: magic, format version, JSON header
// (spec, version, seed, array names and shapes), little-endian float32
// payload, FNV-1a checksum.
std::vector<std::uint8_t> Snapshot(const ModelParams &params);
// Throws kCorruptCheckpoint on bad magic, truncation, or checksum mismatch.
ModelParams Restore(std::span<const std::uint8_t> blob);
// As above, also rejecting a checkpoint built for a different spec.
ModelParams Restore(std::span<const std::uint8_t> blob,
                    const ModelSpec &expected);

void SaveCheckpoint(const std::filesystem::path &path,
                    const ModelParams &params);
ModelParams LoadCheckpoint(const std::filesystem::path &path);

}  // namespace clickadapt

#endif  // CLICKADAPT_SEGMENTER_H_
