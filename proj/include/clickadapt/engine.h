// clickadapt/include/clickadapt/engine.h

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

#ifndef CLICKADAPT_ENGINE_H_
#define CLICKADAPT_ENGINE_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickadapt/config.h"
#include "clickadapt/rng.h"
#include "clickadapt/segmenter.h"
#include "clickadapt/simulator.h"
#include "clickadapt/types.h"

namespace clickadapt {

// One labelled example. The adaptation paths below never read `mask`; it is
// consumed only by simulated clickers and metric recording.
struct Sample {
  std::string id;
  Image image;
  LabelMask mask;
  std::string domain;
};

struct SessionState {
  Image image;
  ClickSet clicks;               // C_t
  std::vector<LabelMask> masks;  // P_1 .. P_t
  std::optional<Click> first_click;
  std::optional<LabelMask> p_final;
  int t = 0;
  AdaptationConfig config;
};

struct PretrainLog {
  std::vector<double> epoch_loss;  // mean total loss per epoch
  int updates = 0;
};

using PretrainProgress = std::function<void(int epoch, double mean_loss)>;

// Trains from an initialization seeded by cfg.rng_seed. Per sample: a
// localization click, error components of that prediction against the mask,
// K ~ U[1, max_train_clicks] ranked clicks, one update on DF + CCG with unit
// weights. Without error components the localization click is used alone.
ModelParams Pretrain(std::span<const Sample> data, ModelSpec spec,
                     const AdaptationConfig &cfg, int epochs,
                     PretrainLog *log = nullptr,
                     const PretrainProgress &progress = {});

struct MiResult {
  LabelMask mask;        // P_t shown to the user
  LabelMask pseudo_gt;   // P_t^initial
  LossValue loss;        // pre-update loss
  bool updated = false;  // false if the gradient was non-finite
  double seconds = 0.0;
};

// Mid-interaction step for click c_t, t >= 2. Throws kNoActiveTerm when both
// MI toggles are off.
MiResult MiStep(SessionState &state, const Click &click, ModelParams &params,
                OptimizerState &opt);

struct PiResult {
  int updates = 0;
  LabelMask p1;
  ClickSet stage2_clicks;
  bool stage2_run = false;
  std::vector<double> update_seconds;
};

// Two-stage post-interaction update. `rng` places the artificial clicks.
// Throws kMissingFinalMask.
PiResult PiAdapt(const SessionState &state, ModelParams &params,
                 OptimizerState &opt, Rng &rng);

// One image of an interactive stream, driven by whatever produces clicks.
class InteractiveSession {
 public:
  // `stream_index` selects the substream used for artificial PI clicks.
  InteractiveSession(Image image, const AdaptationConfig &cfg,
                     std::uint64_t stream_index);

  // The first click is the localization click and runs plain inference;
  // later clicks go through MiStep when MI is enabled.
  const LabelMask &AddClick(const Click &click, ModelParams &params,
                            OptimizerState &opt);
  // Sets p_final to the latest mask and, when accepted, runs PiAdapt.
  PiResult Finish(bool accept, ModelParams &params, OptimizerState &opt);

  const SessionState &state() const { return state_; }
  const LabelMask &mask() const { return state_.masks.back(); }
  int last_updates() const { return last_updates_; }
  double last_update_seconds() const { return last_seconds_; }
  bool finished() const { return finished_; }

 private:
  SessionState state_;
  Rng pi_rng_;
  int last_updates_ = 0;
  double last_seconds_ = 0.0;
  bool finished_ = false;
};

// Source of clicks for a stream of images.
class Clicker {
 public:
  virtual ~Clicker() = default;
  virtual void BeginImage(int index) = 0;
  virtual Click Localization() = 0;
  // Next correction given the displayed mask; nullopt when nothing is left
  // to correct.
  virtual std::optional<Click> Correction(const LabelMask &current,
                                          const ClickSet &history) = 0;
};

// Simulated user reading reference masks, optionally with
// wrong clicks. Localization clicks are never corrupted.
class SimulatedClicker : public Clicker {
 public:
  SimulatedClicker(std::vector<LabelMask> reference, std::uint64_t seed,
                   NoiseMode noise = {});
  void BeginImage(int index) override;
  Click Localization() override;
  std::optional<Click> Correction(const LabelMask &current,
                                  const ClickSet &history) override;
  int corrupted() const { return corrupted_; }
  // Number of times a reference mask was consulted.
  long reference_reads() const { return reads_; }

 private:
  const LabelMask &Reference();

  std::vector<LabelMask> reference_;
  std::uint64_t seed_;
  ClickCorruptor corruptor_;
  Rng rng_;
  int index_ = -1;
  int corrections_ = 0;
  int corrupted_ = 0;
  long reads_ = 0;
};

struct ImageTrace {
  std::string image_id;
  std::uint64_t version_before = 0;
  std::uint64_t version_after = 0;
  int clicks = 0;
  int mi_updates = 0;
  int pi_updates = 0;
  bool stage2_run = false;
  bool stopped_early = false;
};

struct DiceRecord {
  int image_index = 0;
  std::string image_id;
  int t = 0;
  std::vector<double> class_dice;  // index k is class k; 0 is background
  double mean = 0.0;               // over foreground classes
};

struct StreamReport {
  int num_classes = 0;
  int clicks_per_image = 0;
  std::vector<DiceRecord> records;  // one per (image, t), t = 1..T
  std::vector<ImageTrace> images;
  std::vector<double> update_seconds;
  // masks[i][t - 1] when RunOptions::keep_masks is set.
  std::vector<std::vector<LabelMask>> masks;
  std::vector<Click> clicks;  // every click in stream order

  double MeanDiceAt(int t, int first_image = 0, int end_image = -1) const;
  int TotalUpdates() const;
};

// Called once per (image, t) with the displayed mask.
using StepObserver =
    std::function<void(int image_index, int t, const LabelMask &mask)>;

struct RunOptions {
  bool keep_masks = false;
  StepObserver observer;
};

// Processes images in order with a fresh optimizer; params are adapted in
// place. A clicker with nothing to correct freezes the mask for the rest of
// that image's budget. Dice fields of the report are left empty.
StreamReport RunStream(std::span<const Image> images,
                       std::span<const std::string> ids, ModelParams &params,
                       const AdaptationConfig &cfg, Clicker &clicker,
                       const RunOptions &options = {});

// Simulated-user stream with Dice recorded against each sample's mask.
StreamReport RunStream(std::span<const Sample> samples, ModelParams &params,
                       const AdaptationConfig &cfg, NoiseMode noise = {},
                       bool keep_masks = false);

}  // namespace clickadapt

#endif  // CLICKADAPT_ENGINE_H_
