// clickadapt/src/service.cc

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

#include "clickadapt/service.h"

#include <chrono>
#include <cstdlib>

#include "clickadapt/dataset.h"
#include "clickadapt/png_io.h"
#include "clickadapt/rle.h"
#include "httplib.h"

namespace clickadapt {

namespace {

using Json = nlohmann::json;

void CheckVersion(const Json &request) {
  if (!request.is_object() || !request.contains("v") || request["v"] != 1)
    throw Error(ErrorCode::kInvalidArgument, "payload must carry \"v\": 1");
}

std::string DecodeBase64(const std::string &in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::string out;
  int acc = 0, bits = 0;
  for (char c : in) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = value(c);
    if (v < 0) throw Error(ErrorCode::kBadImage, "invalid base64 image");
    acc = (acc << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

double Millis(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

Json ErrorBody(ErrorCode code, const std::string &message) {
  return {{"v", 1}, {"error", {{"code", ToString(code)}, {"message", message}}}};
}

}  // namespace

int HttpStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSessionNotFound: return 404;
    case ErrorCode::kConcurrentClick:
    case ErrorCode::kSessionClosed:
    case ErrorCode::kDuplicateClick:
    case ErrorCode::kImageAlreadySet: return 409;
    case ErrorCode::kNoModelLoaded: return 503;
    case ErrorCode::kNotSupported: return 501;
    case ErrorCode::kNonFiniteGradient: return 500;
    default: return 400;
  }
}

SessionService::SessionService(AdaptationConfig config) : config_(std::move(config)) {
  config_.Validate();
}

void SessionService::SetModel(ModelParams params, std::string checkpoint_id) {
  std::lock_guard<std::mutex> lock(model_mu_);
  opt_ = OptimizerState::Fresh(params, config_.lr_mi);
  version_ = params.version();
  params_ = std::move(params);
  loaded_ = true;
  std::lock_guard<std::mutex> slock(sessions_mu_);
  checkpoint_id_ = checkpoint_id;
  status_checkpoint_id_ = std::move(checkpoint_id);
}

void SessionService::SetDataset(std::vector<Sample> samples) {
  std::lock_guard<std::mutex> lock(sessions_mu_);
  dataset_.clear();
  for (Sample &s : samples) {
    std::string id = s.id;
    dataset_.emplace(std::move(id), std::move(s));
  }
}

void SessionService::RequireModel() const {
  if (!loaded_) throw Error(ErrorCode::kNoModelLoaded, "no checkpoint loaded");
}

std::shared_ptr<SessionService::Session> SessionService::Find(const std::string &id) {
  std::lock_guard<std::mutex> lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end())
    throw Error(ErrorCode::kSessionNotFound, "unknown session '" + id + "'");
  return it->second;
}

Json SessionService::CreateSession(const Json &request, const std::string &png) {
  CheckVersion(request);
  RequireModel();

  AdaptationConfig cfg = config_;
  if (request.contains("config")) {
    Json merged = config_;
    merged.merge_patch(request["config"]);
    try {
      cfg = merged.get<AdaptationConfig>();
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::kConfig, e.what());
    }
    cfg.Validate();
  }

  Image image;
  if (!png.empty()) {
    image = DecodeImagePng(std::span(reinterpret_cast<const std::uint8_t *>(png.data()), png.size()));
  } else if (request.contains("image_png_base64")) {
    const std::string bytes = DecodeBase64(request["image_png_base64"].get<std::string>());
    image = DecodeImagePng(std::span(reinterpret_cast<const std::uint8_t *>(bytes.data()), bytes.size()));
  } else if (request.contains("dataset_id")) {
    const std::string key = request["dataset_id"].get<std::string>();
    std::lock_guard<std::mutex> lock(sessions_mu_);
    auto it = dataset_.find(key);
    if (it == dataset_.end())
      throw Error(ErrorCode::kBadImage, "unknown dataset id '" + key + "'");
    image = it->second.image;
  } else {
    throw Error(ErrorCode::kBadImage, "request carries no image");
  }

  int K = 0;
  std::uint64_t version = 0;
  {
    std::lock_guard<std::mutex> lock(model_mu_);
    const ModelSpec &spec = params_->spec();
    const int factor = 1 << spec.depth;
    if (image.channels() != spec.image_channels || image.height() % factor ||
        image.width() % factor)
      throw Error(ErrorCode::kBadImage, "image does not fit the loaded model");
    if (cfg.guidance_sigma != spec.guidance_sigma)
      throw Error(ErrorCode::kConfig, "guidance_sigma differs from the model's encoding");
    K = spec.num_classes;
    version = params_->version();
  }

  auto session = std::make_shared<Session>();
  const int H = image.height(), W = image.width();
  std::uint64_t stream_index = 0;
  {
    std::lock_guard<std::mutex> lock(sessions_mu_);
    stream_index = request.contains("stream_index")
                       ? request["stream_index"].get<std::uint64_t>()
                       : next_index_;
    next_index_ += 1;
    session->id = "s" + std::to_string(next_id_++);
    session->version_at_open = version;
    session->engine = std::make_unique<InteractiveSession>(std::move(image), cfg, stream_index);
    sessions_[session->id] = session;
  }
  return {{"v", 1},
          {"session_id", session->id},
          {"height", H},
          {"width", W},
          {"num_classes", K},
          {"t", 0},
          {"stream_index", stream_index},
          {"model_version", version},
          {"toggles", cfg.toggles.Tag()}};
}

Json SessionService::SubmitClick(const std::string &id, const Json &request) {
  CheckVersion(request);
  std::shared_ptr<Session> session = Find(id);
  std::unique_lock<std::mutex> busy(session->busy, std::try_to_lock);
  if (!busy.owns_lock())
    throw Error(ErrorCode::kConcurrentClick, "a click is already being processed");
  if (session->closed) throw Error(ErrorCode::kSessionClosed, "session is finished");
  Click click;
  try {
    click.row = request.at("row").get<int>();
    click.col = request.at("col").get<int>();
    click.class_label = request.at("class_label").get<int>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("click: ") + e.what());
  }
  const SessionState &state = session->engine->state();
  if (click.row < 0 || click.col < 0 || click.row >= state.image.height() ||
      click.col >= state.image.width())
    throw Error(ErrorCode::kOutOfBounds, "click outside the image");

  const auto start = std::chrono::steady_clock::now();
  Json mask;
  std::uint64_t version = 0;
  int updates = 0;
  double update_ms = 0.0;
  {
    RequireModel();
    std::lock_guard<std::mutex> lock(model_mu_);
    mask = EncodeRle(session->engine->AddClick(click, *params_, opt_));
    updates = session->engine->last_updates();
    update_ms = session->engine->last_update_seconds() * 1000.0;
    version = params_->version();
    version_ = version;
  }
  return {{"v", 1},
          {"session_id", id},
          {"t", session->engine->state().t},
          {"mask", std::move(mask)},
          {"model_version", version},
          {"updates", updates},
          {"timings", {{"total_ms", Millis(start)}, {"update_ms", update_ms}}}};
}

Json SessionService::FinishSession(const std::string &id, const Json &request) {
  CheckVersion(request);
  const bool accept = request.value("accept", false);
  std::shared_ptr<Session> session = Find(id);
  std::unique_lock<std::mutex> busy(session->busy, std::try_to_lock);
  if (!busy.owns_lock())
    throw Error(ErrorCode::kConcurrentClick, "a click is already being processed");
  if (session->closed) throw Error(ErrorCode::kSessionClosed, "session is finished");
  PiResult pi;
  std::uint64_t version = 0;
  {
    RequireModel();
    std::lock_guard<std::mutex> lock(model_mu_);
    pi = session->engine->Finish(accept, *params_, opt_);
    version = params_->version();
    version_ = version;
  }
  session->closed = true;
  return {{"v", 1},
          {"session_id", id},
          {"accepted", accept},
          {"updates_applied", pi.updates},
          {"stage2_clicks", pi.stage2_clicks.size()},
          {"model_version", version}};
}

std::vector<std::uint8_t> SessionService::MaskPng(const std::string &id) {
  std::shared_ptr<Session> session = Find(id);
  std::lock_guard<std::mutex> busy(session->busy);
  if (session->engine->state().t == 0)
    throw Error(ErrorCode::kEmptyClickSet, "no mask before the first click");
  return EncodeMaskPng(session->engine->mask());
}

Json SessionService::Status() const {
  std::lock_guard<std::mutex> lock(sessions_mu_);
  int open = 0;
  for (const auto &entry : sessions_) open += entry.second->closed ? 0 : 1;
  Json j = {{"v", 1},
            {"model_loaded", loaded_.load()},
            {"model_version", version_.load()},
            {"open_sessions", open},
            {"config", config_}};
  j["checkpoint_id"] = loaded_ ? Json(status_checkpoint_id_) : Json(nullptr);
  if (!loaded_) j["error"] = ToString(ErrorCode::kNoModelLoaded);
  return j;
}

Json SessionService::LoadCheckpoint(const Json &request) {
  CheckVersion(request);
  const std::string path = request.at("path").get<std::string>();
  const std::vector<std::uint8_t> blob = ReadFileBytes(path);
  ModelParams params = Restore(blob);
  const std::string id = HashText(std::string(blob.begin(), blob.end()));
  SetModel(std::move(params), id);
  return {{"v", 1}, {"checkpoint_id", id}, {"model_version", version_.load()}};
}

ModelParams SessionService::SnapshotParams() const {
  std::lock_guard<std::mutex> lock(model_mu_);
  RequireModel();
  return *params_;
}

void SessionService::Mount(httplib::Server &server) {
  auto guarded = [](httplib::Response &res, const auto &body) {
    try {
      body();
    } catch (const Error &e) {
      res.status = HttpStatus(e.code());
      res.set_content(ErrorBody(e.code(), e.what()).dump(), "application/json");
    } catch (const nlohmann::json::exception &e) {
      res.status = 400;
      res.set_content(ErrorBody(ErrorCode::kInvalidArgument, e.what()).dump(),
                      "application/json");
    }
  };
  auto parse = [](const httplib::Request &req) {
    if (req.body.empty()) return Json::object();
    return Json::parse(req.body);
  };
  auto reply = [](httplib::Response &res, const Json &body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  server.Post("/sessions", [=, this](const httplib::Request &req, httplib::Response &res) {
    guarded(res, [&] {
      const bool raw = req.get_header_value("Content-Type") == "image/png";
      Json request = raw ? Json{{"v", 1}} : parse(req);
      if (raw && req.has_param("stream_index"))
        request["stream_index"] = std::stoull(req.get_param_value("stream_index"));
      reply(res, CreateSession(request, raw ? req.body : std::string()), 201);
    });
  });
  server.Post(R"(/sessions/([^/]+)/clicks)",
              [=, this](const httplib::Request &req, httplib::Response &res) {
                guarded(res, [&] { reply(res, SubmitClick(req.matches[1], parse(req))); });
              });
  server.Post(R"(/sessions/([^/]+)/finish)",
              [=, this](const httplib::Request &req, httplib::Response &res) {
                guarded(res, [&] { reply(res, FinishSession(req.matches[1], parse(req))); });
              });
  server.Post(R"(/sessions/([^/]+)/image)",
              [=, this](const httplib::Request &req, httplib::Response &res) {
                guarded(res, [&] {
                  Find(req.matches[1]);
                  throw Error(ErrorCode::kImageAlreadySet, "a session holds exactly one image");
                });
              });
  server.Delete(R"(/sessions/([^/]+)/clicks/last)",
                [=, this](const httplib::Request &req, httplib::Response &res) {
                  guarded(res, [&] {
                    Find(req.matches[1]);
                    throw Error(ErrorCode::kNotSupported,
                                "undo is not supported: parameter updates are not invertible");
                  });
                });
  server.Get(R"(/sessions/([^/]+)/mask.png)",
             [=, this](const httplib::Request &req, httplib::Response &res) {
               guarded(res, [&] {
                 const auto png = MaskPng(req.matches[1]);
                 res.set_content(std::string(png.begin(), png.end()), "image/png");
               });
             });
  server.Get("/status", [=, this](const httplib::Request &, httplib::Response &res) {
    guarded(res, [&] { reply(res, Status()); });
  });
  server.Post("/model/checkpoint",
              [=, this](const httplib::Request &req, httplib::Response &res) {
                guarded(res, [&] { reply(res, LoadCheckpoint(parse(req))); });
              });
}

std::pair<std::string, int> BindAddressFromEnv(const std::string &host, int port) {
  std::string h = host;
  int p = port;
  if (const char *v = std::getenv("CLICKADAPT_BIND"); v && *v) h = v;
  if (const char *v = std::getenv("CLICKADAPT_PORT"); v && *v) {
    char *end = nullptr;
    const long parsed = std::strtol(v, &end, 10);
    if (*end != '\0' || parsed < 0 || parsed > 65535)
      throw Error(ErrorCode::kConfig, std::string("bad CLICKADAPT_PORT '") + v + "'");
    p = static_cast<int>(parsed);
  }
  return {h, p};
}

}  // namespace clickadapt
