// clickadapt/src/engine.cc

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

#include "clickadapt/engine.h"

#include <chrono>

#include "clickadapt/metrics.h"

namespace clickadapt {

namespace {

constexpr std::uint64_t kPretrainStream = 0x7072657472ULL;
constexpr std::uint64_t kPiStream = 0x7069ULL;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

// One optimizer step; false when the gradient was rejected as non-finite.
bool TryUpdate(ModelParams &params, OptimizerState &opt, double lr,
               const TrackedPrediction &tracked, const LossValue &loss,
               double *seconds) {
  const auto start = std::chrono::steady_clock::now();
  opt.lr = lr;
  bool ok = true;
  try {
    UpdateStep(params, opt, tracked, loss);
  } catch (const Error &e) {
    if (e.code() != ErrorCode::kNonFiniteGradient) throw;
    ok = false;
  }
  if (seconds) {
    *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
                   .count();
  }
  return ok;
}

void CheckModelFits(const ModelParams &params, const AdaptationConfig &cfg) {
  if (params.arrays().empty())
    throw Error(ErrorCode::kNoModelLoaded, "parameters are empty");
  if (params.spec().guidance_sigma != cfg.guidance_sigma)
    throw Error(ErrorCode::kConfig,
                "guidance_sigma differs from the model's encoding");
}

}  // namespace

ModelParams Pretrain(std::span<const Sample> data, ModelSpec spec,
                     const AdaptationConfig &cfg, int epochs, PretrainLog *log,
                     const PretrainProgress &progress) {
  cfg.Validate();
  if (data.empty()) throw Error(ErrorCode::kInvalidArgument, "empty dataset");
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  spec.guidance_sigma = cfg.guidance_sigma;
  for (const Sample &s : data) {
    ValidatePair(s.image, s.mask);
    if (s.mask.num_classes() != spec.num_classes)
      throw Error(ErrorCode::kShapeMismatch, "sample " + s.id + " has a different K");
  }

  ModelParams params = ModelParams::Initialize(spec, cfg.rng_seed);
  OptimizerState opt = OptimizerState::Fresh(params, cfg.lr_pretrain);
  AdaptationConfig unit = cfg;
  unit.beta = 1.0;
  Rng rng = Rng(cfg.rng_seed).Fork(kPretrainStream);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.Below(i)]);
    double total = 0.0;
    for (std::size_t idx : order) {
      const Sample &s = data[idx];
      ClickSet loc;
      const Click &c_loc = loc.Add(LocalizationClick(s.mask, rng));
      const LabelMask pred = Predict(s.image, loc, params).Argmax();
      const int k = SampleK(rng, cfg.max_train_clicks);
      const ClickSet errors = TrainingClicks(pred, s.mask, k, rng, &loc);

      ClickSet train;
      if (errors.empty() || cfg.pretrain_keep_localization) train.Add(c_loc);
      for (const Click &c : errors) train.Add(c);

      const TrackedPrediction tracked = PredictTracked(s.image, train, params);
      const LossValue loss =
          TotalLoss(tracked.probs(), s.mask, train.clicks(), unit, true, true);
      total += loss.value;
      if (TryUpdate(params, opt, cfg.lr_pretrain, tracked, loss, nullptr) && log)
        log->updates += 1;
    }
    const double mean = total / data.size();
    if (log) log->epoch_loss.push_back(mean);
    if (progress) progress(epoch, mean);
  }
  return params;
}

MiResult MiStep(SessionState &state, const Click &click, ModelParams &params,
                OptimizerState &opt) {
  const AdaptationToggles &tg = state.config.toggles;
  if (!tg.mid_interaction())
    throw Error(ErrorCode::kNoActiveTerm, "mid-interaction toggles are off");
  if (state.t < 1)
    throw Error(ErrorCode::kInvalidArgument, "mid-interaction needs a previous mask");

  ClickSet next = state.clicks;
  const Click latest = next.Add(click);
  MiResult out;
  out.pseudo_gt = Predict(state.image, next, params).Argmax();
  const TrackedPrediction tracked = PredictTracked(state.image, state.clicks, params);
  out.loss = TotalLoss(tracked.probs(), out.pseudo_gt, std::span(&latest, 1),
                       state.config, tg.dfl_mi, tg.ccgl_mi);
  out.updated = TryUpdate(params, opt, state.config.lr_mi, tracked, out.loss,
                          &out.seconds);
  out.mask = Predict(state.image, next, params).Argmax();

  state.clicks = std::move(next);
  state.masks.push_back(out.mask);
  state.t += 1;
  return out;
}

PiResult PiAdapt(const SessionState &state, ModelParams &params,
                 OptimizerState &opt, Rng &rng) {
  if (!state.p_final)
    throw Error(ErrorCode::kMissingFinalMask, "session has no final mask");
  if (!state.first_click)
    throw Error(ErrorCode::kEmptyClickSet, "session has no localization click");
  const AdaptationConfig &cfg = state.config;
  const AdaptationToggles &tg = cfg.toggles;
  const LabelMask &p_final = *state.p_final;
  ClickSet first;
  first.Add(*state.first_click);

  PiResult out;
  double seconds = 0.0;
  if (tg.s1_pi) {
    const TrackedPrediction tracked = PredictTracked(state.image, first, params);
    out.p1 = tracked.probs().Argmax();
    const LossValue loss =
        TotalLoss(tracked.probs(), p_final, first.clicks(), cfg, true, false);
    if (TryUpdate(params, opt, cfg.lr_pi, tracked, loss, &seconds)) {
      out.updates += 1;
      out.update_seconds.push_back(seconds);
    }
  } else if (tg.stage2()) {
    out.p1 = Predict(state.image, first, params).Argmax();
  }

  if (tg.stage2()) {
    out.stage2_clicks = PiArtificialClicks(out.p1, p_final, cfg.clicks_per_image, rng);
    if (!out.stage2_clicks.empty()) {
      out.stage2_run = true;
      const TrackedPrediction tracked =
          PredictTracked(state.image, out.stage2_clicks, params);
      const LossValue loss = TotalLoss(tracked.probs(), p_final,
                                       out.stage2_clicks.clicks(), cfg,
                                       tg.dfl_pi, tg.ccgl_pi);
      if (TryUpdate(params, opt, cfg.lr_pi, tracked, loss, &seconds)) {
        out.updates += 1;
        out.update_seconds.push_back(seconds);
      }
    }
  }
  return out;
}

InteractiveSession::InteractiveSession(Image image, const AdaptationConfig &cfg,
                                       std::uint64_t stream_index)
    : pi_rng_(Rng(cfg.rng_seed).Fork(kPiStream).Fork(stream_index)) {
  cfg.Validate();
  state_.image = std::move(image);
  state_.config = cfg;
}

const LabelMask &InteractiveSession::AddClick(const Click &click,
                                              ModelParams &params,
                                              OptimizerState &opt) {
  if (finished_) throw Error(ErrorCode::kSessionClosed, "session is finished");
  CheckModelFits(params, state_.config);
  last_updates_ = 0;
  last_seconds_ = 0.0;
  if (state_.t == 0) {
    ClickSet clicks;
    clicks.Add(click);
    LabelMask mask = Predict(state_.image, clicks, params).Argmax();
    state_.first_click = clicks[0];
    state_.clicks = std::move(clicks);
    state_.masks.push_back(std::move(mask));
    state_.t = 1;
  } else if (state_.config.toggles.mid_interaction()) {
    const MiResult r = MiStep(state_, click, params, opt);
    last_updates_ = r.updated ? 1 : 0;
    last_seconds_ = r.seconds;
  } else {
    ClickSet next = state_.clicks;
    next.Add(click);
    LabelMask mask = Predict(state_.image, next, params).Argmax();
    state_.clicks = std::move(next);
    state_.masks.push_back(std::move(mask));
    state_.t += 1;
  }
  return state_.masks.back();
}

PiResult InteractiveSession::Finish(bool accept, ModelParams &params,
                                    OptimizerState &opt) {
  if (finished_) throw Error(ErrorCode::kSessionClosed, "session is finished");
  if (state_.t == 0) throw Error(ErrorCode::kEmptyClickSet, "no clicks submitted");
  state_.p_final = state_.masks.back();
  finished_ = true;
  const AdaptationToggles &tg = state_.config.toggles;
  if (!accept || !(tg.s1_pi || tg.stage2())) return {};
  CheckModelFits(params, state_.config);
  return PiAdapt(state_, params, opt, pi_rng_);
}

SimulatedClicker::SimulatedClicker(std::vector<LabelMask> reference,
                                   std::uint64_t seed, NoiseMode noise)
    : reference_(std::move(reference)),
      seed_(seed),
      corruptor_(noise, Rng(seed).Fork(kNoiseStream)) {}

const LabelMask &SimulatedClicker::Reference() {
  if (index_ < 0 || index_ >= static_cast<int>(reference_.size()))
    throw Error(ErrorCode::kOutOfBounds, "no reference for image " + std::to_string(index_));
  ++reads_;
  return reference_[index_];
}

void SimulatedClicker::BeginImage(int index) {
  index_ = index;
  rng_ = Rng(seed_).Fork(static_cast<std::uint64_t>(index));
  corrections_ = 0;
  corruptor_.BeginImage();
}

Click SimulatedClicker::Localization() { return LocalizationClick(Reference(), rng_); }

std::optional<Click> SimulatedClicker::Correction(const LabelMask &current,
                                                  const ClickSet &history) {
  const LabelMask &ref = Reference();
  Click click;
  try {
    click = CorrectionClick(current, ref, rng_, &history);
  } catch (const Error &e) {
    if (e.code() == ErrorCode::kNoError) return std::nullopt;
    throw;
  }
  ++corrections_;
  if (corruptor_.ShouldCorrupt(corrections_)) {
    click = CorruptClick(click, current, ref, corruptor_.rng(), &history);
    ++corrupted_;
  }
  return click;
}

double StreamReport::MeanDiceAt(int t, int first_image, int end_image) const {
  if (end_image < 0) end_image = static_cast<int>(images.size());
  double sum = 0.0;
  int n = 0;
  for (const DiceRecord &r : records) {
    if (r.t != t || r.image_index < first_image || r.image_index >= end_image) continue;
    sum += r.mean;
    ++n;
  }
  return n ? sum / n : 0.0;
}

int StreamReport::TotalUpdates() const {
  int n = 0;
  for (const ImageTrace &img : images) n += img.mi_updates + img.pi_updates;
  return n;
}

StreamReport RunStream(std::span<const Image> images,
                       std::span<const std::string> ids, ModelParams &params,
                       const AdaptationConfig &cfg, Clicker &clicker,
                       const RunOptions &options) {
  cfg.Validate();
  CheckModelFits(params, cfg);
  if (ids.size() != images.size())
    throw Error(ErrorCode::kInvalidArgument, "one id per image required");
  StreamReport report;
  report.num_classes = params.spec().num_classes;
  report.clicks_per_image = cfg.clicks_per_image;
  OptimizerState opt = OptimizerState::Fresh(params, cfg.lr_mi);

  for (std::size_t i = 0; i < images.size(); ++i) {
    const int index = static_cast<int>(i);
    ImageTrace trace;
    trace.image_id = ids[i];
    trace.version_before = params.version();
    std::vector<LabelMask> kept;
    auto emit = [&](int t, const LabelMask &mask) {
      if (options.observer) options.observer(index, t, mask);
      if (options.keep_masks) kept.push_back(mask);
    };

    clicker.BeginImage(index);
    InteractiveSession session(images[i], cfg, i);
    const Click first = clicker.Localization();
    session.AddClick(first, params, opt);
    report.clicks.push_back(session.state().clicks.back());
    emit(1, session.mask());
    for (int t = 2; t <= cfg.clicks_per_image; ++t) {
      if (!trace.stopped_early) {
        auto next = clicker.Correction(session.mask(), session.state().clicks);
        if (!next) {
          trace.stopped_early = true;
        } else {
          session.AddClick(*next, params, opt);
          report.clicks.push_back(session.state().clicks.back());
          if (session.last_updates()) {
            trace.mi_updates += 1;
            report.update_seconds.push_back(session.last_update_seconds());
          }
        }
      }
      emit(t, session.mask());
    }
    trace.clicks = session.state().t;
    const PiResult pi = session.Finish(true, params, opt);
    trace.pi_updates = pi.updates;
    trace.stage2_run = pi.stage2_run;
    report.update_seconds.insert(report.update_seconds.end(),
                                 pi.update_seconds.begin(), pi.update_seconds.end());
    trace.version_after = params.version();
    report.images.push_back(std::move(trace));
    if (options.keep_masks) report.masks.push_back(std::move(kept));
  }
  return report;
}

StreamReport RunStream(std::span<const Sample> samples, ModelParams &params,
                       const AdaptationConfig &cfg, NoiseMode noise,
                       bool keep_masks) {
  std::vector<Image> images;
  std::vector<std::string> ids;
  std::vector<LabelMask> reference;
  for (const Sample &s : samples) {
    ValidatePair(s.image, s.mask);
    images.push_back(s.image);
    ids.push_back(s.id);
    reference.push_back(s.mask);
  }
  SimulatedClicker clicker(reference, cfg.rng_seed, noise);
  std::vector<DiceRecord> records;
  RunOptions options;
  options.keep_masks = keep_masks;
  options.observer = [&](int index, int t, const LabelMask &mask) {
    DiceRecord r;
    r.image_index = index;
    r.image_id = ids[index];
    r.t = t;
    r.class_dice = ClassDice(mask, reference[index]);
    r.mean = ForegroundDice(mask, reference[index]);
    records.push_back(std::move(r));
  };
  StreamReport report = RunStream(images, ids, params, cfg, clicker, options);
  report.records = std::move(records);
  return report;
}

}  // namespace clickadapt
