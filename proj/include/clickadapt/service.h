// clickadapt/include/clickadapt/service.h

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

#ifndef CLICKADAPT_SERVICE_H_
#define CLICKADAPT_SERVICE_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "clickadapt/engine.h"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace clickadapt {

// Error code plus the HTTP status it maps to.
int HttpStatus(ErrorCode code);

// Live interactive sessions over one shared model. Every method takes and
// returns versioned JSON payloads and may be called from several threads.
// Parameter reads and updates are serialized by one model lock; status
// queries never take it.
class SessionService {
 public:
  explicit SessionService(AdaptationConfig config);

  void SetModel(ModelParams params, std::string checkpoint_id);
  // Samples addressable by id in CreateSession.
  void SetDataset(std::vector<Sample> samples);

  // `request` may carry "dataset_id", "image_png_base64", "config" (partial
  // AdaptationConfig) and "stream_index". A non-empty `png` body takes the
  // place of an image field.
  nlohmann::json CreateSession(const nlohmann::json &request,
                               const std::string &png = {});
  nlohmann::json SubmitClick(const std::string &id, const nlohmann::json &request);
  nlohmann::json FinishSession(const std::string &id, const nlohmann::json &request);
  std::vector<std::uint8_t> MaskPng(const std::string &id);
  nlohmann::json Status() const;
  nlohmann::json LoadCheckpoint(const nlohmann::json &request);

  // Copy of the current parameters, taken under the model lock.
  ModelParams SnapshotParams() const;

  // Registers the HTTP routes on `server`.
  void Mount(httplib::Server &server);

 private:
  struct Session {
    std::string id;
    std::unique_ptr<InteractiveSession> engine;
    std::uint64_t version_at_open = 0;
    std::mutex busy;
    std::atomic<bool> closed{false};
  };

  std::shared_ptr<Session> Find(const std::string &id);
  void RequireModel() const;

  AdaptationConfig config_;
  mutable std::mutex model_mu_;
  std::optional<ModelParams> params_;
  OptimizerState opt_;
  std::string checkpoint_id_;
  std::atomic<std::uint64_t> version_{0};
  std::atomic<bool> loaded_{false};

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, Sample> dataset_;
  std::uint64_t next_index_ = 0;
  std::uint64_t next_id_ = 1;
  std::string status_checkpoint_id_;
};

// Host and port from CLICKADAPT_BIND / CLICKADAPT_PORT, falling back to the
// given defaults.
std::pair<std::string, int> BindAddressFromEnv(const std::string &host, int port);

}  // namespace clickadapt

#endif  // CLICKADAPT_SERVICE_H_
