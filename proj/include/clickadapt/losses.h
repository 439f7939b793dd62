// clickadapt/include/clickadapt/losses.h

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

#ifndef CLICKADAPT_LOSSES_H_
#define CLICKADAPT_LOSSES_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "clickadapt/config.h"
#include "clickadapt/types.h"

namespace clickadapt {

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbFloor = 1e-8;

// Every loss below optionally writes dLoss/dProb (laid out like the ProbMap)
// into `grad`, overwriting its contents.

// 1 - mean_k (2 sum p_k g_k + eps) / (sum p_k + sum g_k + eps), all K classes.
double DiceLoss(const ProbMap &pred, const LabelMask &target,
                std::vector<double> *grad = nullptr);

// Mean over pixels of (1 - p_true)^gamma * -log(p_true), p_true floored at
// kProbFloor.
double FocalLoss(const ProbMap &pred, const LabelMask &target, double gamma,
                 std::vector<double> *grad = nullptr);

// (1 - alpha) * Dice + alpha * Focal.
double DiceFocalLoss(const ProbMap &pred, const LabelMask &target,
                     double alpha, double gamma,
                     std::vector<double> *grad = nullptr);

// Truncated Gaussian around a click: zero outside the box
// |row - click.row| <= 3 sigma and |col - click.col| <= 3 sigma.
double CcgWeight(const Click &click, int row, int col, double sigma);

// Click-centred Gaussian loss:
//   1/(|C| H W) * sum_c sum_ij G_c(ij) [pseudo_gt(ij) == class_c] CE(ij)
// with CE = -log(max(p_{pseudo_gt(ij)}, kProbFloor)).
// Throws kEmptyClickSet.
double CcgLoss(const ProbMap &pred, const LabelMask &pseudo_gt,
               std::span<const Click> clicks, double sigma,
               std::vector<double> *grad = nullptr);

// Loss value with its gradient with respect to the pre-softmax logits of
// `pred`; this is what an update step consumes.
struct LossValue {
  double value = 0.0;
  std::map<std::string, double> terms;
  std::vector<double> grad_logits;
};

// [use_df] * DF + [use_ccg] * beta * CCG. Throws kNoActiveTerm.
LossValue TotalLoss(const ProbMap &pred, const LabelMask &pseudo_gt,
                    std::span<const Click> clicks,
                    const AdaptationConfig &cfg, bool use_df, bool use_ccg);

// Chain rule through the per-pixel softmax:
//   dL/dz_k = p_k (dL/dp_k - sum_j p_j dL/dp_j).
std::vector<double> SoftmaxBackward(const ProbMap &pred,
                                    std::span<const double> grad_probs);

}  // namespace clickadapt

#endif  // CLICKADAPT_LOSSES_H_
