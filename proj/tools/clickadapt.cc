// clickadapt/tools/clickadapt.cc

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

// clickadapt: command-line front end for data generation, pretraining,
// evaluation, adaptation runs, ablations, robustness scenarios and the
// session server.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clickadapt/dataset.h"
#include "clickadapt/engine.h"
#include "clickadapt/png_io.h"
#include "clickadapt/scenario.h"
#include "clickadapt/service.h"
#include "clickadapt/synthetic.h"
#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using clickadapt::AdaptationConfig;
using clickadapt::Error;
using clickadapt::ErrorCode;
using Json = nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Options shared by every subcommand. Flags left unset fall back to the
// config file, then to built-in defaults.
struct Common {
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string config;
  int seeds = 1;

  double alpha = 0, beta = 0, sigma = 0, guidance_sigma = 0, focal_gamma = 0;
  double lr_pretrain = 0, lr_mi = 0, lr_pi = 0;
  int clicks = 0, max_train_clicks = 0;
  std::string toggles;
  bool keep_localization = true;

  std::vector<std::pair<CLI::Option *, std::function<void(AdaptationConfig &)>>> overrides;
  CLI::Option *seed_opt = nullptr;
};

void AddCommon(CLI::App *cmd, Common &c) {
  c.seed_opt = cmd->add_option("--seed", c.seed, "base RNG seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  auto add = [&](const char *name, auto *field, auto apply, const char *help) {
    CLI::Option *opt = cmd->add_option(name, *field, help);
    c.overrides.emplace_back(opt, [field, apply](AdaptationConfig &cfg) { apply(cfg, *field); });
  };
  add("--alpha", &c.alpha, [](AdaptationConfig &g, double v) { g.alpha = v; }, "Dice-Focal weight");
  add("--beta", &c.beta, [](AdaptationConfig &g, double v) { g.beta = v; }, "CCG weight");
  add("--sigma", &c.sigma, [](AdaptationConfig &g, double v) { g.sigma = v; }, "CCG Gaussian std");
  add("--guidance-sigma", &c.guidance_sigma,
      [](AdaptationConfig &g, double v) { g.guidance_sigma = v; }, "click map std");
  add("--focal-gamma", &c.focal_gamma,
      [](AdaptationConfig &g, double v) { g.focal_gamma = v; }, "focal exponent");
  add("--lr-pretrain", &c.lr_pretrain,
      [](AdaptationConfig &g, double v) { g.lr_pretrain = v; }, "pretraining step size");
  add("--lr-mi", &c.lr_mi, [](AdaptationConfig &g, double v) { g.lr_mi = v; },
      "mid-interaction step size");
  add("--lr-pi", &c.lr_pi, [](AdaptationConfig &g, double v) { g.lr_pi = v; },
      "post-interaction step size");
  add("-T,--clicks", &c.clicks, [](AdaptationConfig &g, int v) { g.clicks_per_image = v; },
      "click budget per image");
  add("--max-train-clicks", &c.max_train_clicks,
      [](AdaptationConfig &g, int v) { g.max_train_clicks = v; },
      "upper bound of the training click draw");
  add("--toggles", &c.toggles,
      [](AdaptationConfig &g, const std::string &v) {
        g.toggles = clickadapt::AdaptationToggles::FromTag(v);
      },
      "dfl_mi ccgl_mi dfl_pi ccgl_pi s1_pi as 5 chars of x/-");
  add("--pretrain-keep-localization", &c.keep_localization,
      [](AdaptationConfig &g, bool v) { g.pretrain_keep_localization = v; },
      "forward the localization click with training clicks");
}

Json LoadConfigFile(const Common &c) {
  if (c.config.empty()) return Json::object();
  std::ifstream in(c.config);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read " + c.config);
  try {
    Json j = Json::parse(in);
    if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kConfig, c.config + ": " + e.what());
  }
}

AdaptationConfig ResolveConfig(const Common &c, const Json &file) {
  AdaptationConfig cfg;
  try {
    if (file.contains("adaptation")) cfg = file["adaptation"].get<AdaptationConfig>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kConfig, std::string("adaptation: ") + e.what());
  }
  for (const auto &[opt, apply] : c.overrides) {
    if (opt->count()) apply(cfg);
  }
  if (c.seed_opt->count()) cfg.rng_seed = c.seed;
  cfg.Validate();
  return cfg;
}

template <typename T>
T Section(const Json &file, const char *section, const char *key, T fallback) {
  if (!file.contains(section)) return fallback;
  try {
    return file[section].value(key, fallback);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kConfig, std::string(section) + "." + key + ": " + e.what());
  }
}

fs::path PrepareOut(const Common &c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out.string());
  return out;
}

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void WriteJson(const fs::path &path, const Json &j) { WriteText(path, j.dump(2) + "\n"); }

// Runs the stream once per seed and writes report.csv and summary.json.
void RunSeeds(const Common &c, const fs::path &out, const std::vector<clickadapt::Sample> &data,
              const clickadapt::ModelParams &model, AdaptationConfig cfg,
              const clickadapt::ScenarioOptions &options, const std::string &tag,
              clickadapt::ModelParams *adapted = nullptr) {
  std::string csv;
  std::vector<Json> runs;
  const std::uint64_t base = cfg.rng_seed;
  for (int s = 0; s < c.seeds; ++s) {
    cfg.rng_seed = base + s;
    clickadapt::ModelParams after;
    const clickadapt::StreamReport report =
        clickadapt::RunScenario(data, model, cfg, options, &after);
    clickadapt::AppendReportCsv(&csv, report, tag, cfg.rng_seed, s == 0);
    runs.push_back(clickadapt::SummarizeRun(report, tag, cfg.rng_seed));
    if (adapted && s == 0) *adapted = std::move(after);
    std::cerr << tag << " seed " << cfg.rng_seed << ": Dice@1 "
              << report.MeanDiceAt(1) << "  Dice@" << report.clicks_per_image << " "
              << report.MeanDiceAt(report.clicks_per_image) << "\n";
  }
  WriteText(out / "report.csv", csv);
  cfg.rng_seed = base;
  WriteJson(out / "summary.json", {{"v", 1},
                                   {"scenario", tag},
                                   {"config", cfg},
                                   {"runs", runs},
                                   {"aggregate", clickadapt::AggregateRuns(runs)}});
}

std::atomic<httplib::Server *> g_server{nullptr};

void StopServer(int) {
  if (httplib::Server *s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Online-adaptive interactive segmentation"};
  app.require_subcommand(1);

  // gen-data
  Common gen;
  std::string domain = "source", spec_file;
  int count = 200, classes = 2;
  CLI::App *gen_cmd = app.add_subcommand("gen-data", "write a synthetic dataset");
  AddCommon(gen_cmd, gen);
  gen_cmd->add_option("--domain", domain, "preset: source, inverted, gamma, bias");
  gen_cmd->add_option("--count", count, "number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--classes", classes, "2, or 3 for nested ring and cup");
  gen_cmd->add_option("--spec", spec_file, "JSON domain spec overriding the preset")
      ->check(CLI::ExistingFile);

  // pretrain
  Common pre;
  std::string pre_data;
  int epochs = 0, depth = 0, base_channels = 0;
  CLI::App *pre_cmd = app.add_subcommand("pretrain", "train the interactive model");
  AddCommon(pre_cmd, pre);
  pre_cmd->add_option("--data", pre_data, "dataset directory")->required();
  CLI::Option *epochs_opt = pre_cmd->add_option("--epochs", epochs, "passes over the data");
  CLI::Option *depth_opt = pre_cmd->add_option("--depth", depth, "down/up levels");
  CLI::Option *base_opt = pre_cmd->add_option("--base-channels", base_channels, "first level width");

  // evaluate / adapt / ablate / scenario share model and data flags.
  struct RunFlags {
    Common common;
    std::string model;
    std::vector<std::string> data;
  };
  auto add_run = [&](const char *name, const char *help, RunFlags &f) {
    CLI::App *cmd = app.add_subcommand(name, help);
    AddCommon(cmd, f.common);
    cmd->add_option("--model", f.model, "checkpoint file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", f.data, "dataset directory")->required();
    cmd->add_option("--seeds", f.common.seeds, "number of consecutive seeds")
        ->check(CLI::PositiveNumber);
    return cmd;
  };
  RunFlags eval_f, adapt_f, ablate_f, scen_f;
  CLI::App *eval_cmd = add_run("evaluate", "frozen-model stream", eval_f);
  CLI::App *adapt_cmd = add_run("adapt", "adaptive stream with the configured toggles", adapt_f);
  CLI::App *ablate_cmd = add_run("ablate", "ablation rows over the toggle grid", ablate_f);
  bool full_grid = false;
  ablate_cmd->add_flag("--full-grid", full_grid, "all 32 toggle combinations");
  CLI::App *scen_cmd = add_run("scenario", "robustness scenarios", scen_f);
  std::string kind = "standard", noise = "p=0.4";
  int budget = 5, per_domain = 25;
  scen_cmd->add_option("--kind", kind, "standard, worst-first, mixed, noisy, budget");
  scen_cmd->add_option("--noise", noise, "none, p=<f>, first=<n>, images=<f>");
  scen_cmd->add_option("--budget", budget, "clicks per image for budget runs");
  scen_cmd->add_option("--per-domain", per_domain, "images taken from each --data for mixed");

  // serve
  Common srv;
  std::string srv_model, srv_data, host;
  int port = 0;
  CLI::App *srv_cmd = app.add_subcommand("serve", "HTTP session service");
  AddCommon(srv_cmd, srv);
  srv_cmd->add_option("--model", srv_model, "checkpoint loaded at start");
  srv_cmd->add_option("--data", srv_data, "dataset whose ids sessions may open");
  CLI::Option *host_opt = srv_cmd->add_option("--host", host, "bind address");
  CLI::Option *port_opt = srv_cmd->add_option("--port", port, "bind port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) {
      const Json file = LoadConfigFile(gen);
      clickadapt::SyntheticDomainSpec spec =
          clickadapt::PresetDomain(domain, count, gen.seed, classes);
      if (!spec_file.empty()) {
        std::ifstream in(spec_file);
        try {
          spec = Json::parse(in).get<clickadapt::SyntheticDomainSpec>();
        } catch (const nlohmann::json::exception &e) {
          throw Error(ErrorCode::kConfig, spec_file + ": " + e.what());
        }
      } else if (file.contains("domain")) {
        try {
          spec = file["domain"].get<clickadapt::SyntheticDomainSpec>();
        } catch (const nlohmann::json::exception &e) {
          throw Error(ErrorCode::kConfig, std::string("domain: ") + e.what());
        }
      }
      spec.Validate();
      const fs::path out = PrepareOut(gen);
      const Json spec_json = spec;
      clickadapt::SaveDataset(out, clickadapt::GenerateDomain(spec),
                              clickadapt::HashText(spec_json.dump()));
      WriteJson(out / "domain_spec.json", spec_json);
      std::cerr << "wrote " << spec.count << " samples to " << out << "\n";
    } else if (*pre_cmd) {
      const Json file = LoadConfigFile(pre);
      const AdaptationConfig cfg = ResolveConfig(pre, file);
      clickadapt::ModelSpec spec;
      if (file.contains("model")) {
        try {
          spec = file["model"].get<clickadapt::ModelSpec>();
        } catch (const nlohmann::json::exception &e) {
          throw Error(ErrorCode::kConfig, std::string("model: ") + e.what());
        }
      }
      if (depth_opt->count()) spec.depth = depth;
      if (base_opt->count()) spec.base_channels = base_channels;
      const int n_epochs = epochs_opt->count() ? epochs : Section(file, "pretrain", "epochs", 8);
      const std::vector<clickadapt::Sample> data = clickadapt::LoadDataset(pre_data);
      spec.num_classes = data.front().mask.num_classes();
      spec.image_channels = data.front().image.channels();
      spec.Validate();
      clickadapt::PretrainLog log;
      const clickadapt::ModelParams params = clickadapt::Pretrain(
          data, spec, cfg, n_epochs, &log, [](int epoch, double loss) {
            std::cerr << "epoch " << epoch + 1 << " mean loss " << loss << "\n";
          });
      const fs::path out = PrepareOut(pre);
      clickadapt::SaveCheckpoint(out / "model.ckpt", params);
      WriteJson(out / "pretrain_log.json", {{"v", 1},
                                            {"epochs", n_epochs},
                                            {"updates", log.updates},
                                            {"epoch_loss", log.epoch_loss},
                                            {"model", params.spec()},
                                            {"config", cfg}});
    } else if (*eval_cmd || *adapt_cmd || *ablate_cmd || *scen_cmd) {
      RunFlags &f = *eval_cmd ? eval_f : *adapt_cmd ? adapt_f : *ablate_cmd ? ablate_f : scen_f;
      const Json file = LoadConfigFile(f.common);
      AdaptationConfig cfg = ResolveConfig(f.common, file);
      const clickadapt::ModelParams model = clickadapt::LoadCheckpoint(f.model);
      std::vector<clickadapt::Sample> data;
      for (const std::string &dir : f.data) {
        std::vector<clickadapt::Sample> part = clickadapt::LoadDataset(dir);
        if (*scen_cmd && kind == "mixed" && static_cast<int>(part.size()) > per_domain)
          part.resize(per_domain);
        data.insert(data.end(), part.begin(), part.end());
      }
      const fs::path out = PrepareOut(f.common);
      clickadapt::ScenarioOptions options;
      if (*eval_cmd) {
        cfg.toggles = clickadapt::AdaptationToggles::AllOff();
        RunSeeds(f.common, out, data, model, cfg, options, "frozen");
      } else if (*adapt_cmd) {
        clickadapt::ModelParams adapted;
        RunSeeds(f.common, out, data, model, cfg, options, "adapt:" + cfg.toggles.Tag(),
                 &adapted);
        clickadapt::SaveCheckpoint(out / "adapted.ckpt", adapted);
      } else if (*ablate_cmd) {
        std::string csv;
        Json rows = Json::array();
        const auto grid = full_grid ? clickadapt::FullToggleGrid() : clickadapt::AblationRows();
        for (const auto &toggles : grid) {
          AdaptationConfig row_cfg = cfg;
          row_cfg.toggles = toggles;
          std::vector<Json> runs;
          for (int s = 0; s < f.common.seeds; ++s) {
            row_cfg.rng_seed = cfg.rng_seed + s;
            const auto report = clickadapt::RunScenario(data, model, row_cfg, options);
            clickadapt::AppendReportCsv(&csv, report, "ablate:" + toggles.Tag(),
                                        row_cfg.rng_seed, csv.empty());
            runs.push_back(clickadapt::SummarizeRun(report, toggles.Tag(), row_cfg.rng_seed));
          }
          Json row = clickadapt::AggregateRuns(runs);
          row["toggles"] = toggles.Tag();
          row["runs"] = runs;
          std::cerr << "row " << toggles.Tag() << " Dice@T "
                    << row["mean_dice"].back().get<double>() << "\n";
          rows.push_back(std::move(row));
        }
        WriteText(out / "report.csv", csv);
        WriteJson(out / "summary.json", {{"v", 1}, {"scenario", "ablate"}, {"config", cfg},
                                         {"rows", rows}});
      } else {
        options.kind = clickadapt::ParseScenario(kind);
        options.noise = clickadapt::NoiseMode::Parse(noise);
        options.budget = budget;
        if (options.kind == clickadapt::ScenarioKind::kBudget && budget < 1)
          throw Error(ErrorCode::kConfig, "--budget must be >= 1");
        RunSeeds(f.common, out, data, model, cfg, options, kind);
      }
    } else if (*srv_cmd) {
      const Json file = LoadConfigFile(srv);
      const AdaptationConfig cfg = ResolveConfig(srv, file);
      auto [env_host, env_port] = clickadapt::BindAddressFromEnv(
          Section<std::string>(file, "serve", "host", "127.0.0.1"),
          Section(file, "serve", "port", 8080));
      if (host_opt->count()) env_host = host;
      if (port_opt->count()) env_port = port;
      clickadapt::SessionService service(cfg);
      if (!srv_model.empty()) service.LoadCheckpoint({{"v", 1}, {"path", srv_model}});
      if (!srv_data.empty()) service.SetDataset(clickadapt::LoadDataset(srv_data));
      httplib::Server server;
      service.Mount(server);
      g_server = &server;
      std::signal(SIGINT, StopServer);
      std::signal(SIGTERM, StopServer);
      std::cerr << "listening on " << env_host << ":" << env_port << "\n";
      if (!server.listen(env_host, env_port))
        throw Error(ErrorCode::kIo, "cannot bind " + env_host + ":" + std::to_string(env_port));
      g_server = nullptr;
    }
  } catch (const Error &e) {
    std::cerr << "clickadapt: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception &e) {
    std::cerr << "clickadapt: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
