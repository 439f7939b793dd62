// clickadapt/src/losses.cc

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

#include "clickadapt/losses.h"

#include <algorithm>
#include <cmath>

namespace clickadapt {

namespace {

void CheckShapes(const ProbMap &pred, const LabelMask &target) {
  if (pred.height() != target.height() || pred.width() != target.width() ||
      pred.num_classes() != target.num_classes())
    throw Error(ErrorCode::kShapeMismatch, "prediction vs target");
}

}  // namespace

double DiceLoss(const ProbMap &pred, const LabelMask &target,
                std::vector<double> *grad) {
  CheckShapes(pred, target);
  const int K = pred.num_classes();
  const std::size_t plane = pred.plane_size();
  std::vector<double> intersection(K, 0.0), pred_sum(K, 0.0),
      target_sum(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = pred.at_index(k, p);
      pred_sum[k] += v;
      if (target.at_index(p) == k) {
        intersection[k] += v;
        target_sum[k] += 1.0;
      }
    }
  }
  double mean_score = 0.0;
  for (int k = 0; k < K; ++k) {
    mean_score += (2.0 * intersection[k] + kDiceSmooth) /
                  (pred_sum[k] + target_sum[k] + kDiceSmooth);
  }
  mean_score /= K;

  if (grad) {
    grad->assign(plane * K, 0.0);
    for (int k = 0; k < K; ++k) {
      const double num = 2.0 * intersection[k] + kDiceSmooth;
      const double den = pred_sum[k] + target_sum[k] + kDiceSmooth;
      for (std::size_t p = 0; p < plane; ++p) {
        const double g = target.at_index(p) == k ? 1.0 : 0.0;
        (*grad)[k * plane + p] = -(2.0 * g * den - num) / (den * den) / K;
      }
    }
  }
  return 1.0 - mean_score;
}

double FocalLoss(const ProbMap &pred, const LabelMask &target, double gamma,
                 std::vector<double> *grad) {
  CheckShapes(pred, target);
  if (!(gamma >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "focal gamma must be >= 0");
  const std::size_t plane = pred.plane_size();
  if (grad) grad->assign(plane * pred.num_classes(), 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    const int k = target.at_index(p);
    const double raw = pred.at_index(k, p);
    const double pt = std::max(raw, kProbFloor);
    const double one_minus = 1.0 - pt;
    const double nll = -std::log(pt);
    total += std::pow(one_minus, gamma) * nll;
    if (grad && raw > kProbFloor) {
      double d = -std::pow(one_minus, gamma) / pt;
      if (gamma > 0.0 && one_minus > 0.0)
        d -= gamma * std::pow(one_minus, gamma - 1.0) * nll;
      (*grad)[k * plane + p] = d / plane;
    }
  }
  return total / plane;
}

double DiceFocalLoss(const ProbMap &pred, const LabelMask &target,
                     double alpha, double gamma, std::vector<double> *grad) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "alpha must be in [0,1]");
  std::vector<double> dice_grad, focal_grad;
  const double dice = DiceLoss(pred, target, grad ? &dice_grad : nullptr);
  const double focal =
      FocalLoss(pred, target, gamma, grad ? &focal_grad : nullptr);
  if (grad) {
    grad->resize(dice_grad.size());
    for (std::size_t i = 0; i < dice_grad.size(); ++i)
      (*grad)[i] = (1.0 - alpha) * dice_grad[i] + alpha * focal_grad[i];
  }
  return (1.0 - alpha) * dice + alpha * focal;
}

double CcgWeight(const Click &click, int row, int col, double sigma) {
  const double dr = row - click.row;
  const double dc = col - click.col;
  const double box = 3.0 * sigma;
  if (std::abs(dr) > box || std::abs(dc) > box) return 0.0;
  return std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
}

double CcgLoss(const ProbMap &pred, const LabelMask &pseudo_gt,
               std::span<const Click> clicks, double sigma,
               std::vector<double> *grad) {
  CheckShapes(pred, pseudo_gt);
  if (clicks.empty())
    throw Error(ErrorCode::kEmptyClickSet, "CCG loss needs at least one click");
  if (!(sigma > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  const int H = pred.height();
  const int W = pred.width();
  const std::size_t plane = pred.plane_size();

  // Accumulated weight sum_c G_c I_c per pixel; only each click's 3-sigma box
  // can contribute.
  std::vector<double> weight(plane, 0.0);
  const int radius = static_cast<int>(std::floor(3.0 * sigma));
  for (const Click &c : clicks) {
    const int r0 = std::max(0, c.row - radius);
    const int r1 = std::min(H - 1, c.row + radius);
    const int c0 = std::max(0, c.col - radius);
    const int c1 = std::min(W - 1, c.col + radius);
    for (int r = r0; r <= r1; ++r) {
      for (int q = c0; q <= c1; ++q) {
        const std::size_t p = static_cast<std::size_t>(r) * W + q;
        if (pseudo_gt.at_index(p) != c.class_label) continue;
        weight[p] += CcgWeight(c, r, q, sigma);
      }
    }
  }

  const double norm = 1.0 / (static_cast<double>(clicks.size()) * H * W);
  if (grad) grad->assign(plane * pred.num_classes(), 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (weight[p] == 0.0) continue;
    const int k = pseudo_gt.at_index(p);
    const double raw = pred.at_index(k, p);
    const double pt = std::max(raw, kProbFloor);
    total += weight[p] * -std::log(pt);
    if (grad && raw > kProbFloor) (*grad)[k * plane + p] = -weight[p] / pt * norm;
  }
  return total * norm;
}

std::vector<double> SoftmaxBackward(const ProbMap &pred,
                                    std::span<const double> grad_probs) {
  const int K = pred.num_classes();
  const std::size_t plane = pred.plane_size();
  if (grad_probs.size() != plane * K)
    throw Error(ErrorCode::kShapeMismatch, "gradient buffer size");
  std::vector<double> out(plane * K);
  for (std::size_t p = 0; p < plane; ++p) {
    double dot = 0.0;
    for (int k = 0; k < K; ++k)
      dot += pred.at_index(k, p) * grad_probs[k * plane + p];
    for (int k = 0; k < K; ++k) {
      out[k * plane + p] =
          pred.at_index(k, p) * (grad_probs[k * plane + p] - dot);
    }
  }
  return out;
}

LossValue TotalLoss(const ProbMap &pred, const LabelMask &pseudo_gt,
                    std::span<const Click> clicks,
                    const AdaptationConfig &cfg, bool use_df, bool use_ccg) {
  if (!use_df && !use_ccg)
    throw Error(ErrorCode::kNoActiveTerm, "both loss terms disabled");
  LossValue loss;
  std::vector<double> grad(pred.probs().size(), 0.0);
  if (use_df) {
    std::vector<double> dice_grad, focal_grad;
    const double dice = DiceLoss(pred, pseudo_gt, &dice_grad);
    const double focal = FocalLoss(pred, pseudo_gt, cfg.focal_gamma, &focal_grad);
    loss.terms["dice"] = dice;
    loss.terms["focal"] = focal;
    loss.value += (1.0 - cfg.alpha) * dice + cfg.alpha * focal;
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad[i] += (1.0 - cfg.alpha) * dice_grad[i] + cfg.alpha * focal_grad[i];
  }
  if (use_ccg) {
    std::vector<double> ccg_grad;
    const double ccg = CcgLoss(pred, pseudo_gt, clicks, cfg.sigma, &ccg_grad);
    loss.terms["ccg"] = ccg;
    loss.value += cfg.beta * ccg;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += cfg.beta * ccg_grad[i];
  }
  loss.grad_logits = SoftmaxBackward(pred, grad);
  return loss;
}

}  // namespace clickadapt
