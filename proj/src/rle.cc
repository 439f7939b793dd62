// clickadapt/src/rle.cc

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

#include "clickadapt/rle.h"

namespace clickadapt {

nlohmann::json EncodeRle(const LabelMask &mask) {
  nlohmann::json runs = nlohmann::json::array();
  const auto labels = mask.labels();
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    runs.push_back({labels[i], j - i});
    i = j;
  }
  return {{"v", 1},
          {"height", mask.height()},
          {"width", mask.width()},
          {"num_classes", mask.num_classes()},
          {"runs", std::move(runs)}};
}

LabelMask DecodeRle(const nlohmann::json &payload) {
  try {
    if (payload.at("v").get<int>() != 1)
      throw Error(ErrorCode::kInvalidArgument, "unsupported RLE version");
    const int H = payload.at("height").get<int>();
    const int W = payload.at("width").get<int>();
    const int K = payload.at("num_classes").get<int>();
    if (H <= 0 || W <= 0) throw Error(ErrorCode::kInvalidArgument, "bad RLE extent");
    if (K < 2 || K > 255) throw Error(ErrorCode::kInvalidArgument, "bad RLE class count");
    const std::size_t total = static_cast<std::size_t>(H) * W;
    std::vector<std::uint8_t> labels;
    labels.reserve(total);
    for (const auto &run : payload.at("runs")) {
      const int label = run.at(0).get<int>();
      const std::size_t length = run.at(1).get<std::size_t>();
      if (label < 0 || label >= K || length == 0 || labels.size() + length > total)
        throw Error(ErrorCode::kInvalidArgument, "bad RLE run");
      labels.insert(labels.end(), length, static_cast<std::uint8_t>(label));
    }
    if (labels.size() != total)
      throw Error(ErrorCode::kInvalidArgument, "RLE does not cover the raster");
    return LabelMask(H, W, K, std::move(labels));
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed RLE: ") + e.what());
  }
}

}  // namespace clickadapt
