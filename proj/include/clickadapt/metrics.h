// clickadapt/include/clickadapt/metrics.h

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

#ifndef CLICKADAPT_METRICS_H_
#define CLICKADAPT_METRICS_H_

#include <set>
#include <vector>

#include "clickadapt/types.h"

namespace clickadapt {

struct StreamReport;

// 2TP / (2TP + FP + FN) for one class. 1.0 when neither mask contains the
// class, 0.0 when exactly one does. Throws kShapeMismatch.
double Dice(const LabelMask &pred, const LabelMask &gt, int class_id);

// Dice of the binarization "label in class_ids".
double UnionRegionDice(const LabelMask &pred, const LabelMask &gt,
                       const std::set<int> &class_ids);

// Dice for every class 0..K-1.
std::vector<double> ClassDice(const LabelMask &pred, const LabelMask &gt);

// Mean of ClassDice over classes 1..K-1.
double ForegroundDice(const LabelMask &pred, const LabelMask &gt);

struct ClicksToTargetResult {
  std::vector<int> per_image;
  double mean = 0.0;
};

// First t whose mean Dice reaches `target`, else `max_clicks`. Images whose
// run is shorter than max_clicks and never reach the target count as
// max_clicks.
ClicksToTargetResult ClicksToTarget(const StreamReport &report,
                                    double target = 0.8, int max_clicks = 20);

}  // namespace clickadapt

#endif  // CLICKADAPT_METRICS_H_
