// clickadapt/src/metrics.cc

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

#include "clickadapt/metrics.h"

#include <algorithm>

#include "clickadapt/engine.h"

namespace clickadapt {

namespace {

template <typename Pred>
double BinaryDice(const LabelMask &pred, const LabelMask &gt, Pred in_class) {
  if (pred.height() != gt.height() || pred.width() != gt.width())
    throw Error(ErrorCode::kShapeMismatch, "dice operands");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const bool a = in_class(pred.at_index(p));
    const bool b = in_class(gt.at_index(p));
    tp += a && b;
    fp += a && !b;
    fn += !a && b;
  }
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

double Dice(const LabelMask &pred, const LabelMask &gt, int class_id) {
  return BinaryDice(pred, gt, [class_id](int v) { return v == class_id; });
}

double UnionRegionDice(const LabelMask &pred, const LabelMask &gt,
                       const std::set<int> &class_ids) {
  if (class_ids.empty())
    throw Error(ErrorCode::kInvalidArgument, "class_ids must be nonempty");
  return BinaryDice(pred, gt, [&](int v) { return class_ids.count(v) > 0; });
}

std::vector<double> ClassDice(const LabelMask &pred, const LabelMask &gt) {
  std::vector<double> out(gt.num_classes());
  for (int k = 0; k < gt.num_classes(); ++k) out[k] = Dice(pred, gt, k);
  return out;
}

double ForegroundDice(const LabelMask &pred, const LabelMask &gt) {
  double sum = 0.0;
  for (int k = 1; k < gt.num_classes(); ++k) sum += Dice(pred, gt, k);
  return sum / (gt.num_classes() - 1);
}

ClicksToTargetResult ClicksToTarget(const StreamReport &report, double target,
                                    int max_clicks) {
  ClicksToTargetResult out;
  out.per_image.assign(report.images.size(), max_clicks);
  for (const DiceRecord &r : report.records) {
    if (r.t > max_clicks || r.mean < target) continue;
    int &slot = out.per_image[r.image_index];
    slot = std::min(slot, r.t);
  }
  double sum = 0.0;
  for (int v : out.per_image) sum += v;
  out.mean = out.per_image.empty() ? 0.0 : sum / out.per_image.size();
  return out;
}

}  // namespace clickadapt
