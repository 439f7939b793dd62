// clickadapt/src/simulator.cc

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

#include "clickadapt/simulator.h"

#include <algorithm>
#include <cstdio>
#include <deque>

namespace clickadapt {

namespace {

void CheckPair(const LabelMask &a, const LabelMask &b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw Error(ErrorCode::kShapeMismatch, "prediction vs reference");
}

// Uniform free pixel of a component, or nullopt if all are taken.
std::optional<std::pair<int, int>> PickFree(const ErrorComponent &comp, Rng &rng,
                                            const ClickSet *taken) {
  if (!taken || taken->empty())
    return comp.pixels[rng.Below(comp.pixels.size())];
  std::vector<std::pair<int, int>> free;
  free.reserve(comp.pixels.size());
  for (const auto &px : comp.pixels) {
    if (!taken->Contains(px.first, px.second)) free.push_back(px);
  }
  if (free.empty()) return std::nullopt;
  return free[rng.Below(free.size())];
}

}  // namespace

std::vector<ErrorComponent> ErrorComponents(const LabelMask &pred,
                                            const LabelMask &ref) {
  CheckPair(pred, ref);
  const int H = pred.height(), W = pred.width();
  const int K = std::max(pred.num_classes(), ref.num_classes());
  std::vector<char> visited(static_cast<std::size_t>(H) * W, 0);
  std::vector<ErrorComponent> out;
  std::deque<std::pair<int, int>> queue;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const std::size_t seed = static_cast<std::size_t>(r) * W + c;
      if (visited[seed] || pred.at_index(seed) == ref.at_index(seed)) continue;
      ErrorComponent comp;
      std::vector<int> votes(K, 0);
      visited[seed] = 1;
      queue.emplace_back(r, c);
      while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        comp.pixels.emplace_back(y, x);
        votes[ref.at(y, x)] += 1;
        const int dy[4] = {-1, 1, 0, 0};
        const int dx[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const int ny = y + dy[d], nx = x + dx[d];
          if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          const std::size_t n = static_cast<std::size_t>(ny) * W + nx;
          if (visited[n] || pred.at_index(n) == ref.at_index(n)) continue;
          visited[n] = 1;
          queue.emplace_back(ny, nx);
        }
      }
      comp.size = static_cast<int>(comp.pixels.size());
      comp.correct_class = static_cast<int>(
          std::max_element(votes.begin(), votes.end()) - votes.begin());
      comp.kind = comp.correct_class == 0 ? ErrorComponent::Kind::kFalsePositive
                                          : ErrorComponent::Kind::kFalseNegative;
      out.push_back(std::move(comp));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ErrorComponent &a, const ErrorComponent &b) {
                     return a.size > b.size;
                   });
  return out;
}

Click LocalizationClick(const LabelMask &gt, Rng &rng) {
  std::vector<std::size_t> fg;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt.at_index(p) != 0) fg.push_back(p);
  }
  if (fg.empty()) throw Error(ErrorCode::kEmptyForeground, "mask has no foreground");
  const std::size_t p = fg[rng.Below(fg.size())];
  const int row = static_cast<int>(p / gt.width());
  const int col = static_cast<int>(p % gt.width());
  return Click{row, col, gt.at_index(p), 1};
}

ClickSet TrainingClicks(const LabelMask &pred, const LabelMask &gt, int k,
                        Rng &rng, const ClickSet *taken) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  ClickSet out;
  for (const ErrorComponent &comp : ErrorComponents(pred, gt)) {
    if (static_cast<int>(out.size()) >= k) break;
    auto px = PickFree(comp, rng, taken);
    if (!px) continue;
    out.Add(px->first, px->second, gt.at(px->first, px->second));
  }
  return out;
}

int SampleK(Rng &rng, int t_max) {
  if (t_max < 1) throw Error(ErrorCode::kInvalidArgument, "t_max must be >= 1");
  return rng.UniformInt(1, t_max);
}

Click CorrectionClick(const LabelMask &pred, const LabelMask &ref, Rng &rng,
                      const ClickSet *taken) {
  for (const ErrorComponent &comp : ErrorComponents(pred, ref)) {
    auto px = PickFree(comp, rng, taken);
    if (!px) continue;
    return Click{px->first, px->second, ref.at(px->first, px->second), 0};
  }
  throw Error(ErrorCode::kNoError, "prediction matches reference");
}

ClickSet PiArtificialClicks(const LabelMask &p1, const LabelMask &p_final,
                            int t, Rng &rng) {
  return TrainingClicks(p1, p_final, t, rng);
}

NoiseMode NoiseMode::Parse(const std::string &text) {
  auto number = [&](std::size_t offset) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text.substr(offset), &used);
      if (used != text.size() - offset) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception &) {
      throw Error(ErrorCode::kConfig, "bad noise mode '" + text + "'");
    }
  };
  NoiseMode mode;
  if (text.empty() || text == "none") return mode;
  if (text.rfind("p=", 0) == 0) {
    mode = FractionWrong(number(2));
  } else if (text.rfind("first=", 0) == 0) {
    mode = FirstNWrong(static_cast<int>(number(6)));
  } else if (text.rfind("images=", 0) == 0) {
    mode = ImageFractionWrong(number(7));
  } else {
    throw Error(ErrorCode::kConfig, "bad noise mode '" + text + "'");
  }
  if (mode.p < 0 || mode.p > 1 || mode.q < 0 || mode.q > 1 || mode.n < 0)
    throw Error(ErrorCode::kConfig, "noise mode out of range: " + text);
  return mode;
}

std::string NoiseMode::ToString() const {
  char buf[64];
  switch (kind) {
    case Kind::kNone:
      return "none";
    case Kind::kFractionWrong:
      std::snprintf(buf, sizeof buf, "p=%g", p);
      return buf;
    case Kind::kFirstNWrong:
      return "first=" + std::to_string(n);
    case Kind::kImageFractionWrong:
      std::snprintf(buf, sizeof buf, "images=%g", q);
      return buf;
  }
  return "none";
}

Click CorruptClick(const Click &click, const LabelMask &pred,
                   const LabelMask &ref, Rng &rng, const ClickSet *taken) {
  CheckPair(pred, ref);
  std::vector<std::size_t> correct;
  for (std::size_t p = 0; p < ref.size(); ++p) {
    if (pred.at_index(p) != ref.at_index(p)) continue;
    const int row = static_cast<int>(p / ref.width());
    const int col = static_cast<int>(p % ref.width());
    if (taken && taken->Contains(row, col)) continue;
    correct.push_back(p);
  }
  Click out = click;
  if (!correct.empty()) {
    const std::size_t p = correct[rng.Below(correct.size())];
    out.row = static_cast<int>(p / ref.width());
    out.col = static_cast<int>(p % ref.width());
  }
  const int K = ref.num_classes();
  const int truth = ref.at(out.row, out.col);
  if (K == 2) {
    out.class_label = 1 - truth;
  } else {
    const int draw = rng.UniformInt(0, K - 2);
    out.class_label = draw >= truth ? draw + 1 : draw;
  }
  return out;
}

void ClickCorruptor::BeginImage() {
  image_wrong_ = mode_.kind == NoiseMode::Kind::kImageFractionWrong &&
                 rng_.Bernoulli(mode_.q);
}

bool ClickCorruptor::ShouldCorrupt(int index) {
  switch (mode_.kind) {
    case NoiseMode::Kind::kNone:
      return false;
    case NoiseMode::Kind::kFractionWrong:
      return rng_.Bernoulli(mode_.p);
    case NoiseMode::Kind::kFirstNWrong:
      return index <= mode_.n;
    case NoiseMode::Kind::kImageFractionWrong:
      return image_wrong_;
  }
  return false;
}

std::vector<Click> CorruptClicks(std::span<const Click> clicks,
                                 const LabelMask &pred, const LabelMask &ref,
                                 const NoiseMode &mode, Rng &rng,
                                 int *num_corrupted) {
  ClickCorruptor corruptor(mode, rng);
  corruptor.BeginImage();
  ClickSet taken;
  for (const Click &c : clicks) taken.Add(c.row, c.col, c.class_label);
  std::vector<Click> out;
  out.reserve(clicks.size());
  int changed = 0;
  for (std::size_t i = 0; i < clicks.size(); ++i) {
    if (corruptor.ShouldCorrupt(static_cast<int>(i) + 1)) {
      Click wrong = CorruptClick(clicks[i], pred, ref, corruptor.rng(), &taken);
      if (wrong.row != clicks[i].row || wrong.col != clicks[i].col)
        taken.Add(wrong.row, wrong.col, wrong.class_label);
      out.push_back(wrong);
      ++changed;
    } else {
      out.push_back(clicks[i]);
    }
  }
  rng = corruptor.rng();
  if (num_corrupted) *num_corrupted = changed;
  return out;
}

}  // namespace clickadapt
