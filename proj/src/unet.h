// clickadapt/src/unet.h

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

// Internal: parameter layout and graph construction for the click-conditioned
// U-Net. Layout order and BuildUNet's consumption order must agree.

#ifndef CLICKADAPT_SRC_UNET_H_
#define CLICKADAPT_SRC_UNET_H_

#include <string>
#include <vector>

#include "clickadapt/segmenter.h"
#include "nn.h"

namespace clickadapt::unet {

enum class ParamKind { kConvWeight, kUpWeight, kScale, kBias };

struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  ParamKind kind;
  int fan_in;
};

inline int NormGroups(int channels) { return channels >= 4 ? 4 : channels; }

inline int LevelChannels(const ModelSpec &spec, int level) {
  return spec.base_channels << level;
}

// Two 3x3 conv -> group norm -> ReLU stages.
inline void AddBlockLayout(std::vector<ParamInfo> *out, const std::string &prefix,
                           int in_ch, int out_ch) {
  out->push_back({prefix + ".conv1.weight", {out_ch, in_ch, 3, 3}, ParamKind::kConvWeight, in_ch * 9});
  out->push_back({prefix + ".norm1.weight", {out_ch}, ParamKind::kScale, 0});
  out->push_back({prefix + ".norm1.bias", {out_ch}, ParamKind::kBias, 0});
  out->push_back({prefix + ".conv2.weight", {out_ch, out_ch, 3, 3}, ParamKind::kConvWeight, out_ch * 9});
  out->push_back({prefix + ".norm2.weight", {out_ch}, ParamKind::kScale, 0});
  out->push_back({prefix + ".norm2.bias", {out_ch}, ParamKind::kBias, 0});
}

inline std::vector<ParamInfo> Layout(const ModelSpec &spec) {
  std::vector<ParamInfo> out;
  int in_ch = spec.in_channels();
  for (int l = 0; l < spec.depth; ++l) {
    AddBlockLayout(&out, "enc" + std::to_string(l), in_ch, LevelChannels(spec, l));
    in_ch = LevelChannels(spec, l);
  }
  AddBlockLayout(&out, "bottleneck", in_ch, LevelChannels(spec, spec.depth));
  for (int l = spec.depth - 1; l >= 0; --l) {
    const int up_in = LevelChannels(spec, l + 1), ch = LevelChannels(spec, l);
    const std::string p = "dec" + std::to_string(l);
    out.push_back({p + ".up.weight", {up_in, ch, 2, 2}, ParamKind::kUpWeight, up_in * 4});
    out.push_back({p + ".up.bias", {ch}, ParamKind::kBias, 0});
    AddBlockLayout(&out, p, 2 * ch, ch);
  }
  const int c0 = LevelChannels(spec, 0);
  out.push_back({"head.weight", {spec.out_channels(), c0, 1, 1}, ParamKind::kConvWeight, c0});
  out.push_back({"head.bias", {spec.out_channels()}, ParamKind::kBias, 0});
  return out;
}

template <typename T>
int Block(nn::Graph<T> &g, int x, int out_ch, int *cursor) {
  int p = *cursor;
  x = g.Relu(g.GroupNorm(g.Conv3x3(x, p), p + 1, p + 2, NormGroups(out_ch)));
  x = g.Relu(g.GroupNorm(g.Conv3x3(x, p + 3), p + 4, p + 5, NormGroups(out_ch)));
  *cursor = p + 6;
  return x;
}

// Returns the logits node ([K x H x W]).
template <typename T>
int Build(nn::Graph<T> &g, const ModelSpec &spec, int input) {
  int cursor = 0;
  std::vector<int> skips;
  int x = input;
  for (int l = 0; l < spec.depth; ++l) {
    x = Block(g, x, LevelChannels(spec, l), &cursor);
    skips.push_back(x);
    x = g.MaxPool2(x);
  }
  x = Block(g, x, LevelChannels(spec, spec.depth), &cursor);
  for (int l = spec.depth - 1; l >= 0; --l) {
    x = g.UpConv2(x, cursor, cursor + 1);
    cursor += 2;
    x = g.Concat(x, skips[l]);
    x = Block(g, x, LevelChannels(spec, l), &cursor);
  }
  x = g.Conv1x1(x, cursor, cursor + 1);
  cursor += 2;
  if (static_cast<std::size_t>(cursor) != g.num_params())
    throw Error(ErrorCode::kInvalidArgument, "U-Net layout/graph mismatch");
  return x;
}

}  // namespace clickadapt::unet

#endif  // CLICKADAPT_SRC_UNET_H_
