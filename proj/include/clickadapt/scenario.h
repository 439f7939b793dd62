// clickadapt/include/clickadapt/scenario.h

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

#ifndef CLICKADAPT_SCENARIO_H_
#define CLICKADAPT_SCENARIO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "clickadapt/engine.h"
#include "json.hpp"

namespace clickadapt {

enum class ScenarioKind { kStandard, kWorstFirst, kMixed, kNoisy, kBudget };

// "standard", "worst-first", "mixed", "noisy", "budget".
ScenarioKind ParseScenario(const std::string &name);
std::string ToString(ScenarioKind kind);

struct ScenarioOptions {
  ScenarioKind kind = ScenarioKind::kStandard;
  NoiseMode noise = NoiseMode::FractionWrong(0.4);  // used by kNoisy
  int budget = 5;                                    // used by kBudget
};

// Stream order hardest-first: ascending Dice of the frozen model after the
// localization click alone, ties by original position.
std::vector<std::size_t> WorstFirstOrder(const std::vector<Sample> &samples,
                                         const ModelParams &params,
                                         const AdaptationConfig &cfg);

// Seeded Fisher-Yates shuffle.
std::vector<Sample> ShuffleStream(std::vector<Sample> samples, std::uint64_t seed);

// Prepares the stream for the scenario and runs it on a copy of `params`.
// The seed used is cfg.rng_seed.
StreamReport RunScenario(const std::vector<Sample> &samples,
                         const ModelParams &params, const AdaptationConfig &cfg,
                         const ScenarioOptions &options,
                         ModelParams *adapted = nullptr);

// The published ablation rows, in order, followed by the all-off baseline.
std::vector<AdaptationToggles> AblationRows();
// All 32 toggle combinations, all-off first.
std::vector<AdaptationToggles> FullToggleGrid();

// Rows "image_id,t,dice_mean,dice_1..dice_{K-1},scenario,seed" with six
// decimals. The header is written when `header` is set.
void AppendReportCsv(std::string *out, const StreamReport &report,
                     const std::string &scenario, std::uint64_t seed,
                     bool header);

// Per-run summary: mean Dice per t, clicks to 0.8 Dice (cap 20), update
// accounting and update timings.
nlohmann::json SummarizeRun(const StreamReport &report,
                            const std::string &scenario, std::uint64_t seed);

// Mean and standard deviation across seeds of each per-t mean Dice.
nlohmann::json AggregateRuns(const std::vector<nlohmann::json> &runs);

}  // namespace clickadapt

#endif  // CLICKADAPT_SCENARIO_H_
