// clickadapt/include/clickadapt/dataset.h

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

#ifndef CLICKADAPT_DATASET_H_
#define CLICKADAPT_DATASET_H_

#include <filesystem>
#include <string>
#include <vector>

#include "clickadapt/engine.h"

namespace clickadapt {

struct DatasetInfo {
  int num_classes = 2;
  std::string domain;
  std::string spec_hash;
  std::vector<std::string> ids;
};

// Writes images/<id>.png, masks/<id>.png and manifest.json under `dir`.
void SaveDataset(const std::filesystem::path &dir,
                 const std::vector<Sample> &samples,
                 const std::string &spec_hash);

DatasetInfo ReadManifest(const std::filesystem::path &dir);

// Loads every sample listed in the manifest, in manifest order. Throws kIo,
// kConfig for a malformed manifest, kBadImage for unreadable rasters.
std::vector<Sample> LoadDataset(const std::filesystem::path &dir);

// Hex FNV-1a of a canonical text, used to tag generated datasets.
std::string HashText(const std::string &text);

}  // namespace clickadapt

#endif  // CLICKADAPT_DATASET_H_
