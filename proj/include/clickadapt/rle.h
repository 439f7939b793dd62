// clickadapt/include/clickadapt/rle.h

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

#ifndef CLICKADAPT_RLE_H_
#define CLICKADAPT_RLE_H_

#include "clickadapt/types.h"
#include "json.hpp"

namespace clickadapt {

// {"v": 1, "height", "width", "num_classes", "runs": [[label, length], ...]}
// with runs in row-major order.
nlohmann::json EncodeRle(const LabelMask &mask);
// Throws kInvalidArgument on a malformed payload.
LabelMask DecodeRle(const nlohmann::json &payload);

}  // namespace clickadapt

#endif  // CLICKADAPT_RLE_H_
