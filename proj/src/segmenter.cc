// clickadapt/src/segmenter.cc

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

#include "clickadapt/segmenter.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "clickadapt/encoding.h"
#include "clickadapt/rng.h"
#include "nn.h"
#include "unet.h"

namespace clickadapt {

namespace detail {
struct ForwardRecord {
  nn::Graph<float> graph;
  int logits = -1;
  ModelSpec spec;
};
}  // namespace detail

void ModelSpec::Validate() const {
  if (depth < 1 || depth > 6) throw Error(ErrorCode::kConfig, "depth must be in [1,6]");
  if (base_channels < 1) throw Error(ErrorCode::kConfig, "base_channels must be >= 1");
  if (image_channels < 1) throw Error(ErrorCode::kConfig, "image_channels must be >= 1");
  if (num_classes < 2) throw Error(ErrorCode::kConfig, "num_classes must be >= 2");
  if (!(guidance_sigma > 0.0)) throw Error(ErrorCode::kConfig, "guidance_sigma must be > 0");
}

std::string ModelSpec::Diff(const ModelSpec &o) const {
  std::ostringstream out;
  auto field = [&](const char *name, auto a, auto b) {
    if (a != b) out << name << ": " << a << " vs " << b << "; ";
  };
  field("depth", depth, o.depth);
  field("base_channels", base_channels, o.base_channels);
  field("image_channels", image_channels, o.image_channels);
  field("num_classes", num_classes, o.num_classes);
  field("guidance_sigma", guidance_sigma, o.guidance_sigma);
  return out.str();
}

void to_json(nlohmann::json &j, const ModelSpec &s) {
  j = {{"depth", s.depth},
       {"base_channels", s.base_channels},
       {"image_channels", s.image_channels},
       {"num_classes", s.num_classes},
       {"guidance_sigma", s.guidance_sigma}};
}

void from_json(const nlohmann::json &j, ModelSpec &s) {
  s.depth = j.value("depth", s.depth);
  s.base_channels = j.value("base_channels", s.base_channels);
  s.image_channels = j.value("image_channels", s.image_channels);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.guidance_sigma = j.value("guidance_sigma", s.guidance_sigma);
}

ModelParams ModelParams::Initialize(const ModelSpec &spec, std::uint64_t seed) {
  spec.Validate();
  ModelParams params;
  params.spec_ = spec;
  params.seed_ = seed;
  Rng rng(seed);
  for (const unet::ParamInfo &info : unet::Layout(spec)) {
    std::size_t count = 1;
    for (int d : info.shape) count *= d;
    ParamArray array{info.name, info.shape, std::vector<float>(count, 0.0f)};
    switch (info.kind) {
      case unet::ParamKind::kConvWeight:
      case unet::ParamKind::kUpWeight: {
        const double bound = std::sqrt(6.0 / info.fan_in);
        for (float &v : array.values) v = static_cast<float>(rng.Uniform(-bound, bound));
        break;
      }
      case unet::ParamKind::kScale:
        std::fill(array.values.begin(), array.values.end(), 1.0f);
        break;
      case unet::ParamKind::kBias:
        break;
    }
    params.arrays_.push_back(std::move(array));
  }
  return params;
}

std::size_t ModelParams::num_values() const {
  std::size_t n = 0;
  for (const auto &a : arrays_) n += a.values.size();
  return n;
}

bool ModelParams::AllFinite() const {
  for (const auto &a : arrays_) {
    for (float v : a.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

OptimizerState OptimizerState::Fresh(const ModelParams &params, double lr) {
  OptimizerState opt;
  opt.lr = lr;
  for (const auto &a : params.arrays()) {
    opt.m.emplace_back(a.values.size(), 0.0f);
    opt.v.emplace_back(a.values.size(), 0.0f);
  }
  return opt;
}

namespace {

std::shared_ptr<detail::ForwardRecord> Forward(const Image &image,
                                               std::span<const Click> clicks,
                                               const ModelParams &params,
                                               bool track) {
  const ModelSpec &spec = params.spec();
  if (params.arrays().empty())
    throw Error(ErrorCode::kNoModelLoaded, "model has no parameters");
  const int factor = 1 << spec.depth;
  if (image.channels() != spec.image_channels)
    throw Error(ErrorCode::kShapeMismatch,
                "model expects " + std::to_string(spec.image_channels) +
                    " image channel(s), got " + std::to_string(image.channels()));
  if (image.height() % factor || image.width() % factor)
    throw Error(ErrorCode::kShapeMismatch,
                "image extent must be divisible by " + std::to_string(factor));
  GuidanceStack guidance = EncodeClicks(clicks, image.height(), image.width(),
                                        spec.num_classes, spec.guidance_sigma);
  nn::Tensor<float> input(spec.in_channels(), image.height(), image.width());
  input.v = AssembleInput(image, guidance);

  std::vector<std::vector<float>> values;
  values.reserve(params.arrays().size());
  for (const auto &a : params.arrays()) values.push_back(a.values);

  auto record = std::make_shared<detail::ForwardRecord>(
      detail::ForwardRecord{nn::Graph<float>(std::move(values), track), -1, spec});
  const int in = record->graph.Input(std::move(input));
  record->logits = unet::Build(record->graph, spec, in);
  return record;
}

ProbMap ToProbMap(const detail::ForwardRecord &record) {
  const nn::Tensor<float> &logits = record.graph.value(record.logits);
  std::vector<double> z(logits.v.begin(), logits.v.end());
  return ProbMap::FromLogits(logits.c, logits.h, logits.w, z);
}

}  // namespace

ProbMap Predict(const Image &image, std::span<const Click> clicks,
                const ModelParams &params) {
  return ToProbMap(*Forward(image, clicks, params, /*track=*/false));
}

TrackedPrediction PredictTracked(const Image &image,
                                 std::span<const Click> clicks,
                                 const ModelParams &params) {
  TrackedPrediction out;
  auto record = Forward(image, clicks, params, /*track=*/true);
  out.probs_ = ToProbMap(*record);
  out.params_version_ = params.version();
  out.record_ = std::move(record);
  return out;
}

std::vector<std::vector<float>> ParameterGradients(
    const TrackedPrediction &prediction, std::span<const double> grad_logits) {
  if (!prediction.record_)
    throw Error(ErrorCode::kInvalidArgument, "prediction carries no lineage");
  const detail::ForwardRecord &record = *prediction.record_;
  const nn::Tensor<float> &logits = record.graph.value(record.logits);
  if (grad_logits.size() != logits.size())
    throw Error(ErrorCode::kShapeMismatch, "logit gradient size");
  nn::Tensor<float> seed(logits.c, logits.h, logits.w);
  for (std::size_t i = 0; i < seed.size(); ++i)
    seed.v[i] = static_cast<float>(grad_logits[i]);
  std::vector<std::vector<float>> grads;
  record.graph.Backward(record.logits, seed, &grads);
  return grads;
}

void UpdateStep(ModelParams &params, OptimizerState &opt,
                const TrackedPrediction &prediction, const LossValue &loss) {
  if (prediction.params_version() != params.version())
    throw Error(ErrorCode::kInvalidArgument,
                "lineage is from parameter version " +
                    std::to_string(prediction.params_version()) + ", current is " +
                    std::to_string(params.version()));
  std::vector<std::vector<float>> grads =
      ParameterGradients(prediction, loss.grad_logits);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (float g : grads[i]) {
      if (!std::isfinite(g)) {
        std::cerr << "clickadapt: non-finite gradient in "
                  << params.arrays_[i].name << "; update skipped\n";
        throw Error(ErrorCode::kNonFiniteGradient, params.arrays_[i].name);
      }
    }
  }
  if (opt.m.size() != grads.size()) opt = OptimizerState::Fresh(params, opt.lr);

  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  const float b1 = static_cast<float>(opt.beta1), b2 = static_cast<float>(opt.beta2);
  const float step_size = static_cast<float>(opt.lr / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / bc2);
  const float eps = static_cast<float>(opt.eps);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    std::vector<float> &w = params.arrays_[i].values;
    std::vector<float> &m = opt.m[i];
    std::vector<float> &v = opt.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const float g = grads[i][j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
    }
  }
  params.version_ += 1;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'L', 'K', 'A', 'D', 'P', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t Fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void PutU32(std::vector<std::uint8_t> *out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void PutU64(std::vector<std::uint8_t> *out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw Error(ErrorCode::kCorruptCheckpoint, "truncated checkpoint");
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::uint8_t> Take(std::size_t n) {
    Need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> Snapshot(const ModelParams &params) {
  nlohmann::json header;
  header["spec"] = params.spec();
  header["version"] = params.version();
  header["seed"] = params.seed();
  header["arrays"] = nlohmann::json::array();
  for (const auto &a : params.arrays())
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}});
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  PutU32(&out, kFormatVersion);
  PutU32(&out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto &a : params.arrays()) {
    for (float v : a.values) PutU32(&out, std::bit_cast<std::uint32_t>(v));
  }
  PutU64(&out, Fnv1a(out));
  return out;
}

ModelParams Restore(std::span<const std::uint8_t> blob) {
  if (blob.size() < sizeof(kMagic) + 16)
    throw Error(ErrorCode::kCorruptCheckpoint, "truncated checkpoint");
  Reader r(blob);
  auto magic = r.Take(sizeof(kMagic));
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic)))
    throw Error(ErrorCode::kCorruptCheckpoint, "bad magic");
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(blob[blob.size() - 8 + i]) << (8 * i);
  if (stored != Fnv1a(blob.first(blob.size() - 8)))
    throw Error(ErrorCode::kCorruptCheckpoint, "checksum mismatch");
  const std::uint32_t format = r.U32();
  if (format != kFormatVersion)
    throw Error(ErrorCode::kCorruptCheckpoint,
                "unsupported format version " + std::to_string(format));
  const std::uint32_t header_len = r.U32();
  auto header_bytes = r.Take(header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kCorruptCheckpoint, std::string("header: ") + e.what());
  }

  ModelParams params;
  try {
    params.spec_ = header.at("spec").get<ModelSpec>();
    params.version_ = header.at("version").get<std::uint64_t>();
    params.seed_ = header.at("seed").get<std::uint64_t>();
    params.spec_.Validate();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kCorruptCheckpoint, std::string("header: ") + e.what());
  } catch (const Error &e) {
    throw Error(ErrorCode::kCorruptCheckpoint, e.what());
  }

  const auto layout = unet::Layout(params.spec_);
  if (!header.contains("arrays") || header["arrays"].size() != layout.size())
    throw Error(ErrorCode::kCorruptCheckpoint, "array count does not match spec");
  const auto &arrays = header["arrays"];
  for (std::size_t i = 0; i < layout.size(); ++i) {
    ParamArray a;
    try {
      a.name = arrays[i].at("name").get<std::string>();
      a.shape = arrays[i].at("shape").get<std::vector<int>>();
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::kCorruptCheckpoint, std::string("header: ") + e.what());
    }
    if (a.name != layout[i].name || a.shape != layout[i].shape)
      throw Error(ErrorCode::kCorruptCheckpoint, "array '" + a.name + "' does not match spec");
    std::size_t count = 1;
    for (int d : a.shape) count *= d;
    a.values.resize(count);
    for (float &v : a.values) v = std::bit_cast<float>(r.U32());
    params.arrays_.push_back(std::move(a));
  }
  if (r.pos() + 8 != blob.size())
    throw Error(ErrorCode::kCorruptCheckpoint, "payload size does not match header");
  return params;
}

ModelParams Restore(std::span<const std::uint8_t> blob, const ModelSpec &expected) {
  ModelParams params = Restore(blob);
  const std::string diff = expected.Diff(params.spec());
  if (!diff.empty())
    throw Error(ErrorCode::kCorruptCheckpoint, "spec mismatch: " + diff);
  return params;
}

void SaveCheckpoint(const std::filesystem::path &path, const ModelParams &params) {
  const auto blob = Snapshot(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

ModelParams LoadCheckpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return Restore(blob);
}

}  // namespace clickadapt
