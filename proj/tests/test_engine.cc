// clickadapt/tests/test_engine.cc

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
#include "clickadapt/metrics.h"
#include "clickadapt/scenario.h"
#include "clickadapt/synthetic.h"
#include "common.h"
#include "doctest.h"

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

std::vector<Sample> SmallDomain(const std::string &preset, int n, std::uint64_t seed) {
  SyntheticDomainSpec spec = PresetDomain(preset, n, seed);
  spec.size = 32;
  return GenerateDomain(spec);
}

AdaptationConfig SmallConfig(const std::string &toggles, int clicks = 4) {
  AdaptationConfig cfg;
  cfg.toggles = AdaptationToggles::FromTag(toggles);
  cfg.clicks_per_image = clicks;
  cfg.rng_seed = 5;
  return cfg;
}

// Feeds back a fixed click list per image without any reference mask.
class ReplayClicker : public Clicker {
 public:
  explicit ReplayClicker(std::vector<std::vector<Click>> clicks) : clicks_(std::move(clicks)) {}
  void BeginImage(int index) override {
    index_ = index;
    next_ = 0;
  }
  Click Localization() override { return clicks_[index_][next_++]; }
  std::optional<Click> Correction(const LabelMask &, const ClickSet &) override {
    if (next_ >= clicks_[index_].size()) return std::nullopt;
    return clicks_[index_][next_++];
  }

 private:
  std::vector<std::vector<Click>> clicks_;
  int index_ = 0;
  std::size_t next_ = 0;
};

std::vector<std::vector<Click>> ClicksPerImage(const StreamReport &report) {
  std::vector<std::vector<Click>> out;
  std::size_t pos = 0;
  for (const ImageTrace &img : report.images) {
    out.emplace_back(report.clicks.begin() + pos, report.clicks.begin() + pos + img.clicks);
    pos += img.clicks;
  }
  return out;
}

}  // namespace

TEST_CASE("pretraining is reproducible and reduces the loss") {
  const auto data = SmallDomain("source", 8, 1);
  AdaptationConfig cfg;
  cfg.rng_seed = 3;
  PretrainLog log_a, log_b;
  const ModelParams a = Pretrain(data, testing::TinySpec(), cfg, 4, &log_a);
  const ModelParams b = Pretrain(data, testing::TinySpec(), cfg, 4, &log_b);
  CHECK(a == b);
  CHECK(log_a.epoch_loss == log_b.epoch_loss);
  CHECK(log_a.updates == 32);
  CHECK(a.version() == 32);
  CHECK(log_a.epoch_loss.back() < log_a.epoch_loss.front());
  cfg.rng_seed = 4;
  CHECK_FALSE(Pretrain(data, testing::TinySpec(), cfg, 4) == a);
}

TEST_CASE("interactive session lifecycle") {
  const auto data = SmallDomain("source", 1, 2);
  ModelParams params = ModelParams::Initialize(testing::TinySpec(), 1);
  const AdaptationConfig cfg = SmallConfig("xxxxx");
  OptimizerState opt = OptimizerState::Fresh(params, cfg.lr_mi);
  InteractiveSession session(data[0].image, cfg, 0);
  CHECK(CodeOf([&] { session.Finish(true, params, opt); }) == ErrorCode::kEmptyClickSet);

  Rng rng(1);
  const Click loc = LocalizationClick(data[0].mask, rng);
  session.AddClick(loc, params, opt);
  CHECK(params.version() == 0);
  CHECK(session.state().t == 1);
  CHECK(session.mask() == Predict(data[0].image, std::vector<Click>{loc}, params).Argmax());
  CHECK(CodeOf([&] { session.AddClick(loc, params, opt); }) == ErrorCode::kDuplicateClick);

  const Click corr = CorrectionClick(session.mask(), data[0].mask, rng, &session.state().clicks);
  session.AddClick(corr, params, opt);
  CHECK(params.version() == 1);
  CHECK(session.last_updates() == 1);
  CHECK(session.state().masks.size() == 2);

  const PiResult pi = session.Finish(true, params, opt);
  CHECK(params.version() == 1u + pi.updates);
  CHECK(pi.updates >= 1);
  CHECK(CodeOf([&] { session.AddClick(corr, params, opt); }) == ErrorCode::kSessionClosed);
  CHECK(CodeOf([&] { session.Finish(true, params, opt); }) == ErrorCode::kSessionClosed);

  InteractiveSession rejected(data[0].image, cfg, 1);
  rejected.AddClick(loc, params, opt);
  const std::uint64_t before = params.version();
  CHECK(rejected.Finish(false, params, opt).updates == 0);
  CHECK(params.version() == before);
}

TEST_CASE("phase preconditions") {
  const auto data = SmallDomain("source", 1, 2);
  ModelParams params = ModelParams::Initialize(testing::TinySpec(), 1);
  OptimizerState opt = OptimizerState::Fresh(params, 1e-4);
  SessionState state;
  state.image = data[0].image;
  state.config = SmallConfig("--xxx");
  state.clicks.Add(3, 3, 1);
  state.first_click = state.clicks[0];
  state.masks.push_back(LabelMask::Filled(32, 32, 2, 0));
  state.t = 1;
  CHECK(CodeOf([&] { MiStep(state, {5, 5, 1, 0}, params, opt); }) == ErrorCode::kNoActiveTerm);
  Rng rng(0);
  CHECK(CodeOf([&] { PiAdapt(state, params, opt, rng); }) == ErrorCode::kMissingFinalMask);

  AdaptationConfig wrong = SmallConfig("xxxxx");
  wrong.guidance_sigma = 5.0;
  InteractiveSession mismatched(data[0].image, wrong, 0);
  CHECK(CodeOf([&] { mismatched.AddClick({3, 3, 1, 0}, params, opt); }) == ErrorCode::kConfig);
  ModelParams empty;
  InteractiveSession no_model(data[0].image, SmallConfig("xxxxx"), 0);
  CHECK(CodeOf([&] { no_model.AddClick({3, 3, 1, 0}, empty, opt); }) == ErrorCode::kNoModelLoaded);
}

TEST_CASE("stage 1 and stage 2 behaviour") {
  const auto data = SmallDomain("source", 1, 2);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 1);
  SessionState state;
  state.image = data[0].image;
  Rng loc_rng(1);
  state.clicks.Add(LocalizationClick(data[0].mask, loc_rng));
  state.first_click = state.clicks[0];
  state.masks.push_back(Predict(state.image, state.clicks, start).Argmax());
  state.t = 1;
  state.p_final = data[0].mask;

  for (const char *tag : {"--xxx", "--xx-", "----x", "--x--"}) {
    ModelParams params = start;
    state.config = SmallConfig(tag);
    OptimizerState opt = OptimizerState::Fresh(params, 1e-4);
    Rng rng(2);
    const PiResult r = PiAdapt(state, params, opt, rng);
    const AdaptationToggles tg = state.config.toggles;
    CHECK(r.p1 == Predict(state.image, std::vector<Click>{*state.first_click}, start).Argmax());
    CHECK(r.stage2_run == (tg.stage2() && !r.stage2_clicks.empty()));
    CHECK(r.updates == int(tg.s1_pi) + int(r.stage2_run));
    CHECK(params.version() == static_cast<std::uint64_t>(r.updates));
    CHECK(static_cast<int>(r.stage2_clicks.size()) <= state.config.clicks_per_image);
    for (const Click &c : r.stage2_clicks) {
      CHECK(r.p1.at(c.row, c.col) != state.p_final->at(c.row, c.col));
      CHECK(c.class_label == state.p_final->at(c.row, c.col));
    }
  }
}

TEST_CASE("update accounting across the toggle grid") {
  const auto data = SmallDomain("inverted", 3, 4);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 2);
  for (const AdaptationToggles &tg : FullToggleGrid()) {
    ModelParams params = start;
    AdaptationConfig cfg = SmallConfig(tg.Tag());
    const StreamReport report = RunStream(data, params, cfg);
    std::uint64_t version = start.version();
    for (const ImageTrace &img : report.images) {
      INFO(tg.Tag() << " " << img.image_id);
      CHECK(img.version_before == version);
      const int expected = (tg.mid_interaction() ? img.clicks - 1 : 0) + int(tg.s1_pi) +
                           int(img.stage2_run);
      CHECK(img.version_after - img.version_before == static_cast<std::uint64_t>(expected));
      CHECK(img.mi_updates + img.pi_updates == expected);
      if (!tg.stage2()) CHECK_FALSE(img.stage2_run);
      if (!img.stopped_early) CHECK(img.clicks == cfg.clicks_per_image);
      version = img.version_after;
    }
    CHECK(params.version() == version);
    CHECK(report.records.size() == data.size() * cfg.clicks_per_image);
  }
}

TEST_CASE("all-off stream equals a frozen-model replay") {
  const auto data = SmallDomain("inverted", 4, 6);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 3);
  ModelParams params = start;
  const AdaptationConfig cfg = SmallConfig("-----", 5);
  const StreamReport report = RunStream(data, params, cfg, {}, true);
  CHECK(params == start);
  CHECK(report.TotalUpdates() == 0);

  std::vector<LabelMask> refs;
  for (const Sample &s : data) refs.push_back(s.mask);
  SimulatedClicker clicker(refs, cfg.rng_seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    clicker.BeginImage(static_cast<int>(i));
    ClickSet clicks;
    clicks.Add(clicker.Localization());
    LabelMask mask = Predict(data[i].image, clicks, start).Argmax();
    std::vector<LabelMask> frozen = {mask};
    for (int t = 2; t <= cfg.clicks_per_image; ++t) {
      if (auto c = clicker.Correction(mask, clicks)) {
        clicks.Add(*c);
        mask = Predict(data[i].image, clicks, start).Argmax();
      }
      frozen.push_back(mask);
    }
    CHECK(report.masks[i] == frozen);
  }
}

TEST_CASE("mid-interaction off matches a post-only session replay") {
  const auto data = SmallDomain("inverted", 4, 7);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 4);
  ModelParams streamed = start;
  const AdaptationConfig cfg = SmallConfig("--xxx", 5);
  const StreamReport report = RunStream(data, streamed, cfg, {}, true);
  CHECK(report.TotalUpdates() > 0);

  ModelParams manual = start;
  OptimizerState opt = OptimizerState::Fresh(manual, cfg.lr_pi);
  const auto clicks = ClicksPerImage(report);
  for (std::size_t i = 0; i < data.size(); ++i) {
    InteractiveSession session(data[i].image, cfg, i);
    std::vector<LabelMask> masks;
    for (const Click &c : clicks[i]) masks.push_back(session.AddClick(c, manual, opt));
    CHECK(manual.version() == report.images[i].version_before);
    for (std::size_t t = 0; t < masks.size(); ++t) CHECK(masks[t] == report.masks[i][t]);
    session.Finish(true, manual, opt);
  }
  CHECK(manual == streamed);
}

TEST_CASE("ground truth reaches the engine only through clicks") {
  const auto data = SmallDomain("inverted", 4, 8);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 5);
  const AdaptationConfig cfg = SmallConfig("xxxxx", 4);

  std::vector<LabelMask> refs;
  std::vector<Image> images;
  std::vector<std::string> ids;
  for (const Sample &s : data) {
    refs.push_back(s.mask);
    images.push_back(s.image);
    ids.push_back(s.id);
  }
  SimulatedClicker sim(refs, cfg.rng_seed);
  ModelParams with_gt = start;
  RunOptions keep;
  keep.keep_masks = true;
  const StreamReport a = RunStream(images, ids, with_gt, cfg, sim, keep);
  CHECK(sim.reference_reads() > 0);

  // Same clicks, no reference masks anywhere.
  ReplayClicker replay(ClicksPerImage(a));
  ModelParams without_gt = start;
  const StreamReport b = RunStream(images, ids, without_gt, cfg, replay, keep);
  CHECK(b.masks == a.masks);
  CHECK(without_gt == with_gt);
  for (std::size_t i = 0; i < a.images.size(); ++i)
    CHECK(a.images[i].version_after == b.images[i].version_after);
}

TEST_CASE("streams are deterministic under a seed") {
  const auto data = SmallDomain("inverted", 3, 9);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 6);
  ModelParams p1 = start, p2 = start;
  const AdaptationConfig cfg = SmallConfig("xxxxx", 4);
  const StreamReport a = RunStream(data, p1, cfg, NoiseMode::FractionWrong(0.4), true);
  const StreamReport b = RunStream(data, p2, cfg, NoiseMode::FractionWrong(0.4), true);
  CHECK(p1 == p2);
  CHECK(a.masks == b.masks);
  CHECK(a.clicks == b.clicks);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].mean == b.records[i].mean);
}

TEST_CASE("simulated noise never touches the localization click") {
  const auto data = SmallDomain("source", 4, 10);
  std::vector<LabelMask> refs;
  for (const Sample &s : data) refs.push_back(s.mask);
  SimulatedClicker clicker(refs, 3, NoiseMode::FirstNWrong(100));
  const ModelParams params = ModelParams::Initialize(testing::TinySpec(), 7);
  int corrections = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    clicker.BeginImage(static_cast<int>(i));
    ClickSet clicks;
    const Click loc = clicker.Localization();
    CHECK(loc.class_label == refs[i].at(loc.row, loc.col));
    CHECK(loc.class_label != 0);
    clicks.Add(loc);
    const LabelMask mask = Predict(data[i].image, clicks, params).Argmax();
    for (int t = 0; t < 3; ++t) {
      auto c = clicker.Correction(mask, clicks);
      if (!c) break;
      ++corrections;
      CHECK(c->class_label != refs[i].at(c->row, c->col));
      clicks.Add(*c);
    }
  }
  CHECK(clicker.corrupted() == corrections);
}

TEST_CASE("mid-interaction update lowers its own loss") {
  const auto data = SmallDomain("inverted", 20, 11);
  const ModelParams start = ModelParams::Initialize(testing::TinySpec(), 8);
  int descended = 0, trials = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ModelParams params = start;
    OptimizerState opt = OptimizerState::Fresh(params, 1e-4);
    SessionState state;
    state.image = data[i].image;
    state.config = SmallConfig("xx---");
    Rng rng(i);
    state.clicks.Add(LocalizationClick(data[i].mask, rng));
    state.first_click = state.clicks[0];
    state.masks.push_back(Predict(state.image, state.clicks, params).Argmax());
    state.t = 1;
    const ClickSet before = state.clicks;
    const Click corr = CorrectionClick(state.masks.back(), data[i].mask, rng, &before);
    const MiResult r = MiStep(state, corr, params, opt);
    REQUIRE(r.updated);
    const Click latest = state.clicks.back();
    const double after = TotalLoss(Predict(state.image, before, params),
                                   r.pseudo_gt, std::span(&latest, 1), state.config, true, true)
                             .value;
    ++trials;
    descended += after <= r.loss.value;
  }
  CHECK(descended >= 19);
  CHECK(trials == 20);
}
