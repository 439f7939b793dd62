// clickadapt/include/clickadapt/png_io.h

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

#ifndef CLICKADAPT_PNG_IO_H_
#define CLICKADAPT_PNG_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "clickadapt/types.h"

namespace clickadapt {

// 8-bit gray for one channel, RGB for three. Values are rounded to 1/255.
std::vector<std::uint8_t> EncodeImagePng(const Image &image);
// Gray or RGB; alpha is dropped and palettes are expanded. Throws kBadImage.
Image DecodeImagePng(std::span<const std::uint8_t> bytes);

// Palette-indexed PNG whose indices are the class ids.
std::vector<std::uint8_t> EncodeMaskPng(const LabelMask &mask);
// Accepts palette or 8-bit gray rasters of class ids. Throws kBadImage, or
// kLabelOutOfRange for ids >= num_classes.
LabelMask DecodeMaskPng(std::span<const std::uint8_t> bytes, int num_classes);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path &path);
void WriteFileBytes(const std::filesystem::path &path,
                    std::span<const std::uint8_t> bytes);

}  // namespace clickadapt

#endif  // CLICKADAPT_PNG_IO_H_
