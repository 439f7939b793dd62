// clickadapt/src/nn.h

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

// Internal: a minimal define-by-run graph for single-image convolutional
// networks. Only the operations the segmenter needs are provided. Templated
// on the scalar so tests can check gradients in double precision.

#ifndef CLICKADAPT_SRC_NN_H_
#define CLICKADAPT_SRC_NN_H_

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "clickadapt/errors.h"

namespace clickadapt::nn {

template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, T(0)) {}
  std::size_t plane() const { return std::size_t(h) * w; }
  std::size_t size() const { return v.size(); }
  T *channel(int k) { return v.data() + k * plane(); }
  const T *channel(int k) const { return v.data() + k * plane(); }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline constexpr double kNormEps = 1e-5;

template <typename T>
class Graph {
 public:
  // `params` is copied so the recorded lineage stays valid even if the caller
  // mutates its parameters afterwards. When `track` is false no backward
  // state is kept.
  Graph(std::vector<std::vector<T>> params, bool track)
      : params_(std::move(params)), track_(track) {}

  int Input(Tensor<T> x) { return Push(Op::kInput, std::move(x)); }

  int Conv3x3(int x, int weight, int bias = -1);
  int Conv1x1(int x, int weight, int bias);
  int GroupNorm(int x, int gamma, int beta, int groups);
  int Relu(int x);
  int MaxPool2(int x);
  int UpConv2(int x, int weight, int bias);
  int Concat(int a, int b);

  const Tensor<T> &value(int id) const { return nodes_[id].value; }
  std::size_t num_params() const { return params_.size(); }
  bool tracked() const { return track_; }

  // Accumulates dOut/dParams into `param_grads` (resized as needed) given the
  // gradient of some scalar with respect to node `out`.
  void Backward(int out, const Tensor<T> &grad_out,
                std::vector<std::vector<T>> *param_grads) const;

 private:
  enum class Op { kInput, kConv3x3, kConv1x1, kGroupNorm, kRelu, kMaxPool2, kUpConv2, kConcat };
  struct Node {
    Op op;
    Tensor<T> value;
    int a = -1, b = -1;           // input nodes
    int pw = -1, pb = -1;         // parameter indices
    int groups = 0;
    std::vector<T> aux;           // im2col buffer / normalized activations
    std::vector<T> aux2;          // inverse std per group
    std::vector<int> index;       // pooling argmax
  };

  int Push(Op op, Tensor<T> value) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }
  const std::vector<T> &P(int idx) const { return params_[idx]; }

  static void Im2Col(const Tensor<T> &x, std::vector<T> *col);
  static void Col2Im(const T *col, Tensor<T> *dx);

  std::vector<std::vector<T>> params_;
  bool track_;
  std::vector<Node> nodes_;
};

template <typename T>
void Graph<T>::Im2Col(const Tensor<T> &x, std::vector<T> *col) {
  const int H = x.h, W = x.w;
  const std::size_t hw = x.plane();
  col->assign(std::size_t(x.c) * 9 * hw, T(0));
  for (int ci = 0; ci < x.c; ++ci) {
    const T *src = x.channel(ci);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T *dst = col->data() + (std::size_t(ci) * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
        for (int y = 0; y < H; ++y) {
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= H) continue;
          std::memcpy(dst + std::size_t(y) * W + x0, src + std::size_t(yy) * W + x0 + dx,
                      sizeof(T) * (x1 - x0));
        }
      }
    }
  }
}

template <typename T>
void Graph<T>::Col2Im(const T *col, Tensor<T> *dx) {
  const int H = dx->h, W = dx->w;
  const std::size_t hw = dx->plane();
  for (int ci = 0; ci < dx->c; ++ci) {
    T *dst = dx->channel(ci);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T *src = col + (std::size_t(ci) * 9 + ky * 3 + kx) * hw;
        const int ddx = kx - 1;
        const int x0 = std::max(0, -ddx), x1 = std::min(W, W - ddx);
        for (int y = 0; y < H; ++y) {
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= H) continue;
          T *d = dst + std::size_t(yy) * W + ddx;
          const T *s = src + std::size_t(y) * W;
          for (int q = x0; q < x1; ++q) d[q] += s[q];
        }
      }
    }
  }
}

template <typename T>
int Graph<T>::Conv3x3(int x, int weight, int bias) {
  const Tensor<T> &in = nodes_[x].value;
  const std::vector<T> &w = P(weight);
  const int cout = static_cast<int>(w.size() / (std::size_t(in.c) * 9));
  if (std::size_t(cout) * in.c * 9 != w.size())
    throw Error(ErrorCode::kShapeMismatch, "conv3x3 weight size");
  std::vector<T> col;
  Im2Col(in, &col);
  Tensor<T> out(cout, in.h, in.w);
  const Eigen::Index hw = static_cast<Eigen::Index>(in.plane());
  MatMap<T>(out.v.data(), cout, hw).noalias() =
      ConstMatMap<T>(w.data(), cout, in.c * 9) * ConstMatMap<T>(col.data(), in.c * 9, hw);
  if (bias >= 0) {
    for (int k = 0; k < cout; ++k) {
      T *o = out.channel(k);
      const T bk = P(bias)[k];
      for (Eigen::Index i = 0; i < hw; ++i) o[i] += bk;
    }
  }
  int id = Push(Op::kConv3x3, std::move(out));
  Node &n = nodes_[id];
  n.a = x;
  n.pw = weight;
  n.pb = bias;
  if (track_) n.aux = std::move(col);
  return id;
}

template <typename T>
int Graph<T>::Conv1x1(int x, int weight, int bias) {
  const Tensor<T> &in = nodes_[x].value;
  const std::vector<T> &w = P(weight);
  const int cout = static_cast<int>(w.size() / in.c);
  if (std::size_t(cout) * in.c != w.size())
    throw Error(ErrorCode::kShapeMismatch, "conv1x1 weight size");
  Tensor<T> out(cout, in.h, in.w);
  const Eigen::Index hw = static_cast<Eigen::Index>(in.plane());
  MatMap<T>(out.v.data(), cout, hw).noalias() =
      ConstMatMap<T>(w.data(), cout, in.c) * ConstMatMap<T>(in.v.data(), in.c, hw);
  for (int k = 0; k < cout; ++k) {
    T *o = out.channel(k);
    for (Eigen::Index i = 0; i < hw; ++i) o[i] += P(bias)[k];
  }
  int id = Push(Op::kConv1x1, std::move(out));
  nodes_[id].a = x;
  nodes_[id].pw = weight;
  nodes_[id].pb = bias;
  return id;
}

template <typename T>
int Graph<T>::GroupNorm(int x, int gamma, int beta, int groups) {
  const Tensor<T> &in = nodes_[x].value;
  if (in.c % groups != 0)
    throw Error(ErrorCode::kShapeMismatch, "group norm: channels % groups");
  const int per_group = in.c / groups;
  const std::size_t hw = in.plane();
  const std::size_t count = hw * per_group;
  Tensor<T> out(in.c, in.h, in.w);
  std::vector<T> xhat(in.size());
  std::vector<T> inv_std(groups);
  for (int g = 0; g < groups; ++g) {
    const T *src = in.v.data() + g * count;
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += src[i];
    mean /= count;
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= count;
    const T istd = static_cast<T>(1.0 / std::sqrt(var + kNormEps));
    inv_std[g] = istd;
    for (int cc = 0; cc < per_group; ++cc) {
      const int ch = g * per_group + cc;
      const T ga = P(gamma)[ch], be = P(beta)[ch];
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t idx = ch * hw + i;
        const T xh = (in.v[idx] - static_cast<T>(mean)) * istd;
        xhat[idx] = xh;
        out.v[idx] = ga * xh + be;
      }
    }
  }
  int id = Push(Op::kGroupNorm, std::move(out));
  Node &n = nodes_[id];
  n.a = x;
  n.pw = gamma;
  n.pb = beta;
  n.groups = groups;
  if (track_) {
    n.aux = std::move(xhat);
    n.aux2 = std::move(inv_std);
  }
  return id;
}

template <typename T>
int Graph<T>::Relu(int x) {
  Tensor<T> out = nodes_[x].value;
  for (T &v : out.v) v = v > T(0) ? v : T(0);
  int id = Push(Op::kRelu, std::move(out));
  nodes_[id].a = x;
  return id;
}

template <typename T>
int Graph<T>::MaxPool2(int x) {
  const Tensor<T> &in = nodes_[x].value;
  if (in.h % 2 || in.w % 2)
    throw Error(ErrorCode::kShapeMismatch, "max pool needs even extent");
  Tensor<T> out(in.c, in.h / 2, in.w / 2);
  std::vector<int> arg(out.size());
  for (int k = 0; k < in.c; ++k) {
    for (int i = 0; i < out.h; ++i) {
      for (int j = 0; j < out.w; ++j) {
        int best = (k * in.h + 2 * i) * in.w + 2 * j;
        for (int di = 0; di < 2; ++di) {
          for (int dj = 0; dj < 2; ++dj) {
            const int idx = (k * in.h + 2 * i + di) * in.w + 2 * j + dj;
            if (in.v[idx] > in.v[best]) best = idx;
          }
        }
        const std::size_t o = (std::size_t(k) * out.h + i) * out.w + j;
        out.v[o] = in.v[best];
        arg[o] = best;
      }
    }
  }
  int id = Push(Op::kMaxPool2, std::move(out));
  nodes_[id].a = x;
  if (track_) nodes_[id].index = std::move(arg);
  return id;
}

template <typename T>
int Graph<T>::UpConv2(int x, int weight, int bias) {
  const Tensor<T> &in = nodes_[x].value;
  const std::vector<T> &w = P(weight);  // [cin, cout, 2, 2]
  const int cout = static_cast<int>(w.size() / (std::size_t(in.c) * 4));
  if (std::size_t(cout) * in.c * 4 != w.size())
    throw Error(ErrorCode::kShapeMismatch, "upconv weight size");
  const Eigen::Index hw = static_cast<Eigen::Index>(in.plane());
  RowMat<T> z = ConstMatMap<T>(w.data(), in.c, cout * 4).transpose() *
                ConstMatMap<T>(in.v.data(), in.c, hw);
  Tensor<T> out(cout, in.h * 2, in.w * 2);
  for (int co = 0; co < cout; ++co) {
    const T b = P(bias)[co];
    for (int d = 0; d < 4; ++d) {
      const int di = d / 2, dj = d % 2;
      const T *zr = z.data() + (std::size_t(co) * 4 + d) * hw;
      for (int i = 0; i < in.h; ++i) {
        T *row = out.channel(co) + std::size_t(2 * i + di) * out.w + dj;
        for (int j = 0; j < in.w; ++j) row[2 * j] = zr[i * in.w + j] + b;
      }
    }
  }
  int id = Push(Op::kUpConv2, std::move(out));
  nodes_[id].a = x;
  nodes_[id].pw = weight;
  nodes_[id].pb = bias;
  return id;
}

template <typename T>
int Graph<T>::Concat(int a, int b) {
  const Tensor<T> &x = nodes_[a].value;
  const Tensor<T> &y = nodes_[b].value;
  if (x.h != y.h || x.w != y.w)
    throw Error(ErrorCode::kShapeMismatch, "concat extent");
  Tensor<T> out(x.c + y.c, x.h, x.w);
  std::copy(x.v.begin(), x.v.end(), out.v.begin());
  std::copy(y.v.begin(), y.v.end(), out.v.begin() + x.size());
  int id = Push(Op::kConcat, std::move(out));
  nodes_[id].a = a;
  nodes_[id].b = b;
  return id;
}

template <typename T>
void Graph<T>::Backward(int out, const Tensor<T> &grad_out,
                        std::vector<std::vector<T>> *param_grads) const {
  if (!track_)
    throw Error(ErrorCode::kInvalidArgument, "backward on an untracked forward");
  param_grads->resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    (*param_grads)[i].assign(params_[i].size(), T(0));

  std::vector<Tensor<T>> grads(nodes_.size());
  auto grad_of = [&](int id) -> Tensor<T> & {
    Tensor<T> &g = grads[id];
    if (g.v.empty()) {
      const Tensor<T> &v = nodes_[id].value;
      g = Tensor<T>(v.c, v.h, v.w);
    }
    return g;
  };
  grad_of(out).v = grad_out.v;

  for (int id = out; id >= 0; --id) {
    if (grads[id].v.empty()) continue;
    const Node &n = nodes_[id];
    const Tensor<T> &dy = grads[id];
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kConv3x3: {
        const Tensor<T> &in = nodes_[n.a].value;
        const int cout = n.value.c;
        const Eigen::Index hw = static_cast<Eigen::Index>(in.plane());
        ConstMatMap<T> dY(dy.v.data(), cout, hw);
        ConstMatMap<T> col(n.aux.data(), in.c * 9, hw);
        MatMap<T>((*param_grads)[n.pw].data(), cout, in.c * 9).noalias() += dY * col.transpose();
        if (n.pb >= 0) {
          for (int k = 0; k < cout; ++k) (*param_grads)[n.pb][k] += dY.row(k).sum();
        }
        RowMat<T> dcol = ConstMatMap<T>(P(n.pw).data(), cout, in.c * 9).transpose() * dY;
        Col2Im(dcol.data(), &grad_of(n.a));
        break;
      }
      case Op::kConv1x1: {
        const Tensor<T> &in = nodes_[n.a].value;
        const int cout = n.value.c;
        const Eigen::Index hw = static_cast<Eigen::Index>(in.plane());
        ConstMatMap<T> dY(dy.v.data(), cout, hw);
        ConstMatMap<T> X(in.v.data(), in.c, hw);
        MatMap<T>((*param_grads)[n.pw].data(), cout, in.c).noalias() += dY * X.transpose();
        for (int k = 0; k < cout; ++k) (*param_grads)[n.pb][k] += dY.row(k).sum();
        MatMap<T>(grad_of(n.a).v.data(), in.c, hw).noalias() +=
            ConstMatMap<T>(P(n.pw).data(), cout, in.c).transpose() * dY;
        break;
      }
      case Op::kGroupNorm: {
        const Tensor<T> &in = nodes_[n.a].value;
        Tensor<T> &dx = grad_of(n.a);
        const int per_group = in.c / n.groups;
        const std::size_t hw = in.plane();
        const std::size_t count = hw * per_group;
        std::vector<T> &dgamma = (*param_grads)[n.pw];
        std::vector<T> &dbeta = (*param_grads)[n.pb];
        for (int g = 0; g < n.groups; ++g) {
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int cc = 0; cc < per_group; ++cc) {
            const int ch = g * per_group + cc;
            const T ga = P(n.pw)[ch];
            double dga = 0.0, dbe = 0.0;
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t idx = ch * hw + i;
              const double d = dy.v[idx];
              const double xh = n.aux[idx];
              dga += d * xh;
              dbe += d;
              sum_dxhat += d * ga;
              sum_dxhat_xhat += d * ga * xh;
            }
            dgamma[ch] += static_cast<T>(dga);
            dbeta[ch] += static_cast<T>(dbe);
          }
          const double istd = n.aux2[g];
          const double mean_dxhat = sum_dxhat / count;
          const double mean_dxhat_xhat = sum_dxhat_xhat / count;
          for (int cc = 0; cc < per_group; ++cc) {
            const int ch = g * per_group + cc;
            const double ga = P(n.pw)[ch];
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t idx = ch * hw + i;
              const double dxhat = dy.v[idx] * ga;
              dx.v[idx] += static_cast<T>(
                  istd * (dxhat - mean_dxhat - n.aux[idx] * mean_dxhat_xhat));
            }
          }
        }
        break;
      }
      case Op::kRelu: {
        Tensor<T> &dx = grad_of(n.a);
        for (std::size_t i = 0; i < dy.size(); ++i)
          if (n.value.v[i] > T(0)) dx.v[i] += dy.v[i];
        break;
      }
      case Op::kMaxPool2: {
        Tensor<T> &dx = grad_of(n.a);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.v[n.index[i]] += dy.v[i];
        break;
      }
      case Op::kUpConv2: {
        const Tensor<T> &in = nodes_[n.a].value;
        const int cout = n.value.c;
        const Eigen::Index hw = static_cast<Eigen::Index>(in.plane());
        RowMat<T> dz(cout * 4, hw);
        for (int co = 0; co < cout; ++co) {
          double db = 0.0;
          for (int d = 0; d < 4; ++d) {
            const int di = d / 2, dj = d % 2;
            T *zr = dz.data() + (std::size_t(co) * 4 + d) * hw;
            for (int i = 0; i < in.h; ++i) {
              const T *row = dy.channel(co) + std::size_t(2 * i + di) * dy.w + dj;
              for (int j = 0; j < in.w; ++j) {
                zr[i * in.w + j] = row[2 * j];
                db += row[2 * j];
              }
            }
          }
          (*param_grads)[n.pb][co] += static_cast<T>(db);
        }
        ConstMatMap<T> X(in.v.data(), in.c, hw);
        MatMap<T>((*param_grads)[n.pw].data(), in.c, cout * 4).noalias() += X * dz.transpose();
        MatMap<T>(grad_of(n.a).v.data(), in.c, hw).noalias() +=
            ConstMatMap<T>(P(n.pw).data(), in.c, cout * 4) * dz;
        break;
      }
      case Op::kConcat: {
        Tensor<T> &da = grad_of(n.a);
        Tensor<T> &db = grad_of(n.b);
        for (std::size_t i = 0; i < da.size(); ++i) da.v[i] += dy.v[i];
        for (std::size_t i = 0; i < db.size(); ++i) db.v[i] += dy.v[da.size() + i];
        break;
      }
    }
  }
}

}  // namespace clickadapt::nn

#endif  // CLICKADAPT_SRC_NN_H_
