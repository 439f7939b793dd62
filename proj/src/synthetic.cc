// clickadapt/src/synthetic.cc

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

#include "clickadapt/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace clickadapt {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Shape {
  double cy = 0, cx = 0;
  double ry = 0, rx = 0, angle = 0;
  std::vector<std::pair<double, double>> polygon;  // (y, x), empty for ellipses

  double extent() const { return std::max(ry, rx); }

  bool Contains(double y, double x) const {
    if (polygon.empty()) {
      const double dy = y - cy, dx = x - cx;
      const double u = dx * std::cos(angle) + dy * std::sin(angle);
      const double v = -dx * std::sin(angle) + dy * std::cos(angle);
      return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
    }
    bool inside = false;
    for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
      const auto [yi, xi] = polygon[i];
      const auto [yj, xj] = polygon[j];
      if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi)
        inside = !inside;
    }
    return inside;
  }
};

Shape RandomShape(const std::string &family, int size, Rng &rng, double min_r,
                  double max_r) {
  Shape s;
  s.ry = rng.Uniform(min_r, max_r);
  s.rx = rng.Uniform(min_r, max_r);
  s.angle = rng.Uniform(0.0, kPi);
  const double margin = s.extent() + 2.0;
  s.cy = rng.Uniform(margin, size - 1 - margin);
  s.cx = rng.Uniform(margin, size - 1 - margin);
  if (family == "polygons") {
    const int n = rng.UniformInt(5, 8);
    std::vector<double> angles(n);
    for (double &a : angles) a = rng.Uniform(0.0, 2.0 * kPi);
    std::sort(angles.begin(), angles.end());
    for (double a : angles) {
      const double r = s.extent() * rng.Uniform(0.7, 1.0);
      s.polygon.emplace_back(s.cy + r * std::sin(a), s.cx + r * std::cos(a));
    }
  }
  return s;
}

bool Separated(const Shape &a, const Shape &b) {
  const double d = std::hypot(a.cy - b.cy, a.cx - b.cx);
  return d > a.extent() + b.extent() + 3.0;
}

Sample Render(const SyntheticDomainSpec &spec, int index) {
  Rng rng = Rng(spec.seed).Fork(static_cast<std::uint64_t>(index));
  const int S = spec.size;
  const std::size_t plane = static_cast<std::size_t>(S) * S;
  const bool ring_cup = spec.family == "ring-cup";
  const std::string outline = ring_cup ? "ellipses" : spec.family;

  const Shape target = RandomShape(outline, S, rng, S * 0.10, S * 0.22);
  std::vector<Shape> others;
  for (int d = 0; d < spec.distractors; ++d) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      Shape cand = RandomShape(outline, S, rng, S * 0.08, S * 0.18);
      bool ok = Separated(cand, target);
      for (const Shape &o : others) ok = ok && Separated(cand, o);
      if (ok) {
        others.push_back(cand);
        break;
      }
    }
  }
  Shape cup = target;
  const double cup_scale = rng.Uniform(0.4, 0.6);
  cup.ry *= cup_scale;
  cup.rx *= cup_scale;

  std::vector<std::uint8_t> labels(plane, 0);
  std::vector<double> value(plane);
  const double bg = spec.background_intensity +
                    rng.Uniform(-spec.intensity_jitter, spec.intensity_jitter);
  const double fy = rng.Uniform(0.5, 2.0) * 2.0 * kPi / S;
  const double fx = rng.Uniform(0.5, 2.0) * 2.0 * kPi / S;
  const double phase = rng.Uniform(0.0, 2.0 * kPi);
  auto object_level = [&] {
    return spec.object_intensity +
           rng.Uniform(-spec.intensity_jitter, spec.intensity_jitter);
  };
  const double target_level = object_level();
  const double cup_level = std::min(1.0, target_level + 0.15);
  std::vector<double> other_levels;
  for (std::size_t d = 0; d < others.size(); ++d) {
    other_levels.push_back(spec.distractor_intensity < 0.0
                               ? object_level()
                               : spec.distractor_intensity +
                                     rng.Uniform(-spec.intensity_jitter,
                                                 spec.intensity_jitter));
  }

  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * S + c;
      double v = bg + 0.05 * std::sin(fy * r + fx * c + phase);
      for (std::size_t d = 0; d < others.size(); ++d) {
        if (others[d].Contains(r, c)) v = other_levels[d];
      }
      if (target.Contains(r, c)) {
        v = target_level;
        labels[p] = 1;
        if (ring_cup && cup.Contains(r, c)) {
          v = cup_level;
          labels[p] = 2;
        }
      }
      value[p] = v;
    }
  }

  std::vector<float> pixels(plane * spec.channels);
  for (int ch = 0; ch < spec.channels; ++ch) {
    const double gain = 1.0 - 0.1 * ch;
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = value[p] * gain + spec.texture_noise * rng.Normal();
      pixels[ch * plane + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  Image image(spec.channels, S, S, std::move(pixels));
  image = ApplyShift(image, spec.shift, rng);

  char id[96];
  std::snprintf(id, sizeof id, "%s_%04d", spec.name.c_str(), index);
  return Sample{id, std::move(image), LabelMask(S, S, spec.num_classes, std::move(labels)),
                spec.name};
}

const char *KindName(ShiftTransform::Kind k) {
  switch (k) {
    case ShiftTransform::Kind::kInvert: return "invert";
    case ShiftTransform::Kind::kGamma: return "gamma";
    case ShiftTransform::Kind::kContrast: return "contrast";
    case ShiftTransform::Kind::kNoise: return "noise";
    case ShiftTransform::Kind::kBiasField: return "bias_field";
  }
  return "invert";
}

}  // namespace

void SyntheticDomainSpec::Validate() const {
  if (family != "ellipses" && family != "polygons" && family != "ring-cup")
    throw Error(ErrorCode::kConfig, "unknown shape family '" + family + "'");
  if (family == "ring-cup" && num_classes != 3)
    throw Error(ErrorCode::kConfig, "ring-cup needs num_classes = 3");
  if (family != "ring-cup" && num_classes != 2)
    throw Error(ErrorCode::kConfig, family + " needs num_classes = 2");
  if (size < 32) throw Error(ErrorCode::kConfig, "size must be >= 32");
  if (count < 1) throw Error(ErrorCode::kConfig, "count must be >= 1");
  if (channels < 1) throw Error(ErrorCode::kConfig, "channels must be >= 1");
  if (distractors < 0) throw Error(ErrorCode::kConfig, "distractors must be >= 0");
}

void to_json(nlohmann::json &j, const ShiftTransform &t) {
  j = {{"kind", KindName(t.kind)}, {"value", t.value}};
}

void from_json(const nlohmann::json &j, ShiftTransform &t) {
  const std::string kind = j.at("kind").get<std::string>();
  static const ShiftTransform::Kind kinds[] = {
      ShiftTransform::Kind::kInvert, ShiftTransform::Kind::kGamma,
      ShiftTransform::Kind::kContrast, ShiftTransform::Kind::kNoise,
      ShiftTransform::Kind::kBiasField};
  bool found = false;
  for (auto k : kinds) {
    if (kind == KindName(k)) {
      t.kind = k;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::kConfig, "unknown shift '" + kind + "'");
  t.value = j.value("value", 0.0);
}

void to_json(nlohmann::json &j, const SyntheticDomainSpec &s) {
  j = {{"name", s.name},
       {"family", s.family},
       {"size", s.size},
       {"num_classes", s.num_classes},
       {"count", s.count},
       {"channels", s.channels},
       {"seed", s.seed},
       {"object_intensity", s.object_intensity},
       {"background_intensity", s.background_intensity},
       {"intensity_jitter", s.intensity_jitter},
       {"texture_noise", s.texture_noise},
       {"distractors", s.distractors},
       {"distractor_intensity", s.distractor_intensity},
       {"shift", s.shift}};
}

void from_json(const nlohmann::json &j, SyntheticDomainSpec &s) {
  s.name = j.value("name", s.name);
  s.family = j.value("family", s.family);
  s.size = j.value("size", s.size);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.count = j.value("count", s.count);
  s.channels = j.value("channels", s.channels);
  s.seed = j.value("seed", s.seed);
  s.object_intensity = j.value("object_intensity", s.object_intensity);
  s.background_intensity = j.value("background_intensity", s.background_intensity);
  s.intensity_jitter = j.value("intensity_jitter", s.intensity_jitter);
  s.texture_noise = j.value("texture_noise", s.texture_noise);
  s.distractors = j.value("distractors", s.distractors);
  s.distractor_intensity = j.value("distractor_intensity", s.distractor_intensity);
  if (j.contains("shift")) s.shift = j.at("shift").get<std::vector<ShiftTransform>>();
}

Image ApplyShift(const Image &image, const std::vector<ShiftTransform> &chain,
                 Rng &rng) {
  if (chain.empty()) return image;
  const int W = image.width();
  const std::size_t plane = image.plane_size();
  std::vector<float> px(image.pixels().begin(), image.pixels().end());
  for (const ShiftTransform &t : chain) {
    for (std::size_t i = 0; i < px.size(); ++i) {
      double v = px[i];
      switch (t.kind) {
        case ShiftTransform::Kind::kInvert:
          v = 1.0 - v;
          break;
        case ShiftTransform::Kind::kGamma:
          v = std::pow(std::max(v, 0.0), t.value);
          break;
        case ShiftTransform::Kind::kContrast:
          v = 0.5 + t.value * (v - 0.5);
          break;
        case ShiftTransform::Kind::kNoise:
          v += t.value * rng.Normal();
          break;
        case ShiftTransform::Kind::kBiasField: {
          const double col = static_cast<double>((i % plane) % W) / (W - 1);
          v *= 1.0 + t.value * (col - 0.5);
          break;
        }
      }
      px[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return Image(image.channels(), image.height(), W, std::move(px));
}

std::vector<Sample> GenerateDomain(const SyntheticDomainSpec &spec) {
  spec.Validate();
  std::vector<Sample> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(Render(spec, i));
  return out;
}

SyntheticDomainSpec PresetDomain(const std::string &name, int count,
                                 std::uint64_t seed, int num_classes) {
  SyntheticDomainSpec s;
  s.name = name;
  s.count = count;
  s.num_classes = num_classes;
  if (num_classes == 3) s.family = "ring-cup";
  using K = ShiftTransform::Kind;
  std::uint64_t salt = 0;
  if (name == "source") {
    salt = 1;
  } else if (name == "inverted") {
    salt = 2;
    s.shift = {{K::kInvert, 0.0}, {K::kNoise, 0.08}};
  } else if (name == "gamma") {
    salt = 3;
    s.shift = {{K::kGamma, 2.5}, {K::kContrast, 0.6}};
  } else if (name == "bias") {
    salt = 4;
    s.shift = {{K::kBiasField, 1.2}, {K::kNoise, 0.06}};
  } else {
    throw Error(ErrorCode::kConfig, "unknown domain preset '" + name + "'");
  }
  s.seed = Rng(seed).Fork(salt).NextU64();
  return s;
}

}  // namespace clickadapt
