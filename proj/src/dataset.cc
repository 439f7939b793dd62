// clickadapt/src/dataset.cc

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

#include "clickadapt/dataset.h"

#include <cstdio>
#include <fstream>

#include "clickadapt/png_io.h"
#include "json.hpp"

namespace clickadapt {

namespace fs = std::filesystem;

std::string HashText(const std::string &text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void SaveDataset(const fs::path &dir, const std::vector<Sample> &samples,
                 const std::string &spec_hash) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "no samples to save");
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());

  nlohmann::json manifest;
  manifest["v"] = 1;
  manifest["num_classes"] = samples.front().mask.num_classes();
  manifest["domain"] = samples.front().domain;
  manifest["spec_hash"] = spec_hash;
  manifest["ids"] = nlohmann::json::array();
  manifest["domains"] = nlohmann::json::array();
  for (const Sample &s : samples) {
    WriteFileBytes(dir / "images" / (s.id + ".png"), EncodeImagePng(s.image));
    WriteFileBytes(dir / "masks" / (s.id + ".png"), EncodeMaskPng(s.mask));
    manifest["ids"].push_back(s.id);
    manifest["domains"].push_back(s.domain);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

namespace {

nlohmann::json ParseManifest(const fs::path &dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::kIo, "no manifest.json in " + dir.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kConfig, std::string("manifest.json: ") + e.what());
  }
}

}  // namespace

DatasetInfo ReadManifest(const fs::path &dir) {
  const nlohmann::json m = ParseManifest(dir);
  DatasetInfo info;
  try {
    info.num_classes = m.at("num_classes").get<int>();
    info.domain = m.value("domain", std::string());
    info.spec_hash = m.value("spec_hash", std::string());
    info.ids = m.at("ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kConfig, std::string("manifest.json: ") + e.what());
  }
  if (info.num_classes < 2)
    throw Error(ErrorCode::kConfig, "manifest num_classes must be >= 2");
  return info;
}

std::vector<Sample> LoadDataset(const fs::path &dir) {
  const DatasetInfo info = ReadManifest(dir);
  const nlohmann::json m = ParseManifest(dir);
  std::vector<std::string> domains(info.ids.size(), info.domain);
  if (m.contains("domains") && m["domains"].size() == info.ids.size())
    domains = m["domains"].get<std::vector<std::string>>();
  std::vector<Sample> out;
  out.reserve(info.ids.size());
  for (std::size_t i = 0; i < info.ids.size(); ++i) {
    const std::string &id = info.ids[i];
    Sample s;
    s.id = id;
    s.domain = domains[i];
    s.image = DecodeImagePng(ReadFileBytes(dir / "images" / (id + ".png")));
    s.mask = DecodeMaskPng(ReadFileBytes(dir / "masks" / (id + ".png")), info.num_classes);
    ValidatePair(s.image, s.mask);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace clickadapt
