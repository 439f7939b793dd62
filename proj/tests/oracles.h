// clickadapt/tests/oracles.h

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

// Reference implementations written directly from the loss definitions, used
// to check the production code.

#ifndef CLICKADAPT_TESTS_ORACLES_H_
#define CLICKADAPT_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "clickadapt/losses.h"
#include "clickadapt/types.h"

namespace clickadapt::testing {

// 1/(|C| H W) sum_c sum_i sum_j G_c(ij) [y(ij) == l_c] ce(ij), evaluated
// term by term with the Gaussian written out.
inline double BruteForceCcg(const ProbMap &pred, const LabelMask &y,
                            std::span<const Click> clicks, double sigma) {
  const int H = pred.height(), W = pred.width();
  double total = 0.0;
  for (const Click &c : clicks) {
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        const double di = i - c.row, dj = j - c.col;
        const bool in_box = std::abs(di) <= 3 * sigma && std::abs(dj) <= 3 * sigma;
        const double g = in_box ? std::exp(-(di * di + dj * dj) / (2 * sigma * sigma)) : 0.0;
        const double indicator = y.at(i, j) == c.class_label ? 1.0 : 0.0;
        const double p = std::max(pred.at(y.at(i, j), i, j), kProbFloor);
        total += g * indicator * -std::log(p);
      }
    }
  }
  return total / (static_cast<double>(clicks.size()) * H * W);
}

// Loss as a function of raw logits.
inline double TotalLossOfLogits(std::span<const double> logits, int k, int h, int w,
                                const LabelMask &y, std::span<const Click> clicks,
                                const AdaptationConfig &cfg, bool use_df, bool use_ccg) {
  return TotalLoss(ProbMap::FromLogits(k, h, w, logits), y, clicks, cfg, use_df, use_ccg)
      .value;
}

inline std::vector<double> CentralDifferences(
    const std::function<double(std::span<const double>)> &f, std::vector<double> x,
    double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|), skipping entries where both are
// below `floor`.
inline double MaxRelativeError(const std::vector<double> &analytic,
                               const std::vector<double> &numeric, double floor = 1e-10) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale < floor) continue;
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

}  // namespace clickadapt::testing

#endif  // CLICKADAPT_TESTS_ORACLES_H_
