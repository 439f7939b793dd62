// clickadapt/src/scenario.cc

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

#include "clickadapt/scenario.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "clickadapt/metrics.h"

namespace clickadapt {

namespace {

constexpr std::uint64_t kPrescoreStream = 0x707265ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

}  // namespace

ScenarioKind ParseScenario(const std::string &name) {
  if (name == "standard") return ScenarioKind::kStandard;
  if (name == "worst-first") return ScenarioKind::kWorstFirst;
  if (name == "mixed") return ScenarioKind::kMixed;
  if (name == "noisy") return ScenarioKind::kNoisy;
  if (name == "budget") return ScenarioKind::kBudget;
  throw Error(ErrorCode::kConfig, "unknown scenario '" + name + "'");
}

std::string ToString(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kStandard: return "standard";
    case ScenarioKind::kWorstFirst: return "worst-first";
    case ScenarioKind::kMixed: return "mixed";
    case ScenarioKind::kNoisy: return "noisy";
    case ScenarioKind::kBudget: return "budget";
  }
  return "standard";
}

std::vector<std::size_t> WorstFirstOrder(const std::vector<Sample> &samples,
                                         const ModelParams &params,
                                         const AdaptationConfig &cfg) {
  const Rng base = Rng(cfg.rng_seed).Fork(kPrescoreStream);
  std::vector<double> score(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng = base.Fork(i);
    ClickSet clicks;
    clicks.Add(LocalizationClick(samples[i].mask, rng));
    const LabelMask pred = Predict(samples[i].image, clicks, params).Argmax();
    score[i] = ForegroundDice(pred, samples[i].mask);
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  return order;
}

std::vector<Sample> ShuffleStream(std::vector<Sample> samples, std::uint64_t seed) {
  Rng rng = Rng(seed).Fork(kShuffleStream);
  for (std::size_t i = samples.size(); i > 1; --i)
    std::swap(samples[i - 1], samples[rng.Below(i)]);
  return samples;
}

StreamReport RunScenario(const std::vector<Sample> &samples,
                         const ModelParams &params, const AdaptationConfig &cfg,
                         const ScenarioOptions &options, ModelParams *adapted) {
  AdaptationConfig run_cfg = cfg;
  NoiseMode noise;
  std::vector<Sample> stream;
  switch (options.kind) {
    case ScenarioKind::kStandard:
      stream = samples;
      break;
    case ScenarioKind::kWorstFirst:
      for (std::size_t i : WorstFirstOrder(samples, params, cfg)) stream.push_back(samples[i]);
      break;
    case ScenarioKind::kMixed:
      stream = ShuffleStream(samples, cfg.rng_seed);
      break;
    case ScenarioKind::kNoisy:
      stream = samples;
      noise = options.noise;
      break;
    case ScenarioKind::kBudget:
      stream = samples;
      run_cfg.clicks_per_image = options.budget;
      break;
  }
  ModelParams working = params;
  StreamReport report = RunStream(stream, working, run_cfg, noise);
  if (adapted) *adapted = std::move(working);
  return report;
}

std::vector<AdaptationToggles> AblationRows() {
  std::vector<AdaptationToggles> rows;
  for (const char *tag : {"xxxxx", "-xxxx", "x-xxx", "--xxx", "--x-x", "---xx", "----x", "-----"})
    rows.push_back(AdaptationToggles::FromTag(tag));
  return rows;
}

std::vector<AdaptationToggles> FullToggleGrid() {
  std::vector<AdaptationToggles> grid;
  for (int bits = 0; bits < 32; ++bits) {
    grid.push_back({(bits & 16) != 0, (bits & 8) != 0, (bits & 4) != 0,
                    (bits & 2) != 0, (bits & 1) != 0});
  }
  return grid;
}

void AppendReportCsv(std::string *out, const StreamReport &report,
                     const std::string &scenario, std::uint64_t seed,
                     bool header) {
  const int K = report.num_classes;
  if (header) {
    *out += "image_id,t,dice_mean";
    for (int k = 1; k < K; ++k) *out += ",dice_" + std::to_string(k);
    *out += ",scenario,seed\n";
  }
  char buf[64];
  for (const DiceRecord &r : report.records) {
    *out += r.image_id;
    *out += "," + std::to_string(r.t);
    std::snprintf(buf, sizeof buf, ",%.6f", r.mean);
    *out += buf;
    for (int k = 1; k < K; ++k) {
      std::snprintf(buf, sizeof buf, ",%.6f", r.class_dice[k]);
      *out += buf;
    }
    *out += "," + scenario + "," + std::to_string(seed) + "\n";
  }
}

nlohmann::json SummarizeRun(const StreamReport &report,
                            const std::string &scenario, std::uint64_t seed) {
  nlohmann::json j;
  j["v"] = 1;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["num_images"] = report.images.size();
  j["clicks_per_image"] = report.clicks_per_image;
  std::vector<double> mean;
  for (int t = 1; t <= report.clicks_per_image; ++t) mean.push_back(report.MeanDiceAt(t));
  j["mean_dice"] = mean;
  const ClicksToTargetResult ctt = ClicksToTarget(report, 0.8, 20);
  j["clicks_to_target"] = {{"target", 0.8}, {"max_clicks", 20},
                           {"mean", ctt.mean}, {"per_image", ctt.per_image}};
  std::vector<int> mi, pi;
  for (const ImageTrace &img : report.images) {
    mi.push_back(img.mi_updates);
    pi.push_back(img.pi_updates);
  }
  j["updates"] = {{"total", report.TotalUpdates()},
                  {"mid_interaction", mi},
                  {"post_interaction", pi},
                  {"version_start", report.images.empty() ? 0 : report.images.front().version_before},
                  {"version_end", report.images.empty() ? 0 : report.images.back().version_after}};
  double sum = 0.0, peak = 0.0;
  for (double s : report.update_seconds) {
    sum += s;
    peak = std::max(peak, s);
  }
  const std::size_t n = report.update_seconds.size();
  j["timings"] = {{"updates", n}, {"mean_seconds", n ? sum / n : 0.0}, {"max_seconds", peak}};
  return j;
}

nlohmann::json AggregateRuns(const std::vector<nlohmann::json> &runs) {
  nlohmann::json j;
  j["seeds"] = runs.size();
  if (runs.empty()) return j;
  const std::size_t T = runs.front().at("mean_dice").size();
  std::vector<double> mean(T, 0.0), stddev(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (const auto &r : runs) mean[t] += r.at("mean_dice")[t].get<double>();
    mean[t] /= runs.size();
    for (const auto &r : runs) {
      const double d = r.at("mean_dice")[t].get<double>() - mean[t];
      stddev[t] += d * d;
    }
    stddev[t] = runs.size() > 1 ? std::sqrt(stddev[t] / (runs.size() - 1)) : 0.0;
  }
  j["mean_dice"] = mean;
  j["std_dice"] = stddev;
  return j;
}

}  // namespace clickadapt
