/*
 * Copyright 2026 The slaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "slaug/nnet/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slaug/error.hpp"

namespace slaug::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// cols has shape (cin * k * k, (y1 - y0) * w) and covers output rows [y0, y1).
template <typename T>
void im2col(const T* img, std::size_t cin, std::size_t h, std::size_t w, int k, int pad, std::size_t y0,
            std::size_t y1, T* cols) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const std::size_t band = (y1 - y0) * w;
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* plane = img + ci * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        T* out = cols + row * band;
        const std::ptrdiff_t dy = ky - pad, dx = kx - pad;
        for (auto y = static_cast<std::ptrdiff_t>(y0); y < static_cast<std::ptrdiff_t>(y1); ++y) {
          const std::ptrdiff_t iy = y + dy;
          T* out_row = out + (y - static_cast<std::ptrdiff_t>(y0)) * W;
          if (iy < 0 || iy >= H) {
            std::fill(out_row, out_row + W, T(0));
            continue;
          }
          const T* in_row = plane + iy * W;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
          std::fill(out_row, out_row + x0, T(0));
          std::copy(in_row + x0 + dx, in_row + x1 + dx, out_row + x0);
          std::fill(out_row + x1, out_row + W, T(0));
        }
      }
    }
  }
}

// Output rows per im2col band, sized so one band stays in L2.
template <typename T>
std::size_t band_rows(std::size_t kk, std::size_t w, std::size_t h) {
  constexpr std::size_t kBandBytes = std::size_t{1} << 18;
  return std::clamp<std::size_t>(kBandBytes / std::max<std::size_t>(kk * w * sizeof(T), 1), 1, h);
}

}  // namespace

template <typename T>
Var Tape<T>::push(Tensor<T> value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Tensor<T>{}, requires_grad, std::move(backward)});
  return Var{nodes_.size() - 1};
}

template <typename T>
bool Tape<T>::requires_grad(std::initializer_list<Var> vs) const {
  return std::any_of(vs.begin(), vs.end(), [this](Var v) { return nodes_[v.id].requires_grad; });
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty() && !node.value.empty()) {
    node.grad = Tensor<T>(node.value.n, node.value.c, node.value.h, node.value.w);
  }
  return node.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
  return grad_buffer(v);
}

template <typename T>
void Tape<T>::backward(Var root) {
  if (nodes_[root.id].value.size() != 1) {
    throw InvalidInput("Tape::backward: root must be a scalar");
  }
  for (Node& node : nodes_) node.grad = Tensor<T>{};
  grad_buffer(root).data[0] = T(1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, node.grad);
  }
}

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int pad) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(weight);
  const Tensor<T>& bv = tape.value(bias);
  if (wv.c != xv.c || wv.h != wv.w) throw InvalidInput("conv2d: weight shape does not match input");
  if (bv.size() != wv.n) throw InvalidInput("conv2d: bias size does not match output channels");
  const int k = static_cast<int>(wv.h);
  if (2 * pad != k - 1) throw InvalidInput("conv2d: only 'same' padding is supported");

  const std::size_t cout = wv.n, cin = xv.c, hw = xv.plane();
  const std::size_t kk = cin * wv.h * wv.w;
  const std::size_t rows = band_rows<T>(kk, xv.w, xv.h);
  Tensor<T> out(xv.n, cout, xv.h, xv.w);
  std::vector<T> cols(kk * rows * xv.w);
  CMapMat<T> wmat(wv.data.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(kk));
  for (std::size_t n = 0; n < xv.n; ++n) {
    const T* img = xv.data.data() + n * cin * hw;
    MapMat<T> omat(out.data.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
                   static_cast<Eigen::Index>(hw));
    if (k == 1) {
      omat.noalias() = wmat * CMapMat<T>(img, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(hw));
    } else {
      for (std::size_t y0 = 0; y0 < xv.h; y0 += rows) {
        const std::size_t y1 = std::min(xv.h, y0 + rows);
        const auto len = static_cast<Eigen::Index>((y1 - y0) * xv.w);
        im2col(img, cin, xv.h, xv.w, k, pad, y0, y1, cols.data());
        omat.middleCols(static_cast<Eigen::Index>(y0 * xv.w), len).noalias() =
            wmat * CMapMat<T>(cols.data(), static_cast<Eigen::Index>(kk), len);
      }
    }
    for (std::size_t co = 0; co < cout; ++co) omat.row(static_cast<Eigen::Index>(co)).array() += bv.data[co];
  }

  const bool rg = tape.requires_grad({x, weight, bias});
  return tape.push(std::move(out), rg, [x, weight, bias, pad, k](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& wv = t.value(weight);
    const std::size_t cout = wv.n, cin = xv.c, hw = xv.plane();
    const std::size_t kk = cin * wv.h * wv.w;
    const bool need_x = t.requires_grad(x);
    const bool need_w = t.requires_grad(weight);
    const bool need_b = t.requires_grad(bias);
    CMapMat<T> wmat(wv.data.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(kk));
    const std::size_t rows = band_rows<T>(kk, xv.w, xv.h);
    std::vector<T> cols(kk * rows * xv.w);
    // Input gradient as a same-padded correlation of g with the flipped, transposed kernel.
    const std::size_t kk_t = cout * wv.h * wv.w;
    const std::size_t rows_t = band_rows<T>(kk_t, xv.w, xv.h);
    std::vector<T> gcols;
    RowMat<T> wflip;
    if (need_x && k != 1) {
      gcols.resize(kk_t * rows_t * xv.w);
      wflip.resize(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(kk_t));
      const auto K = static_cast<std::size_t>(k);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t co = 0; co < cout; ++co) {
          for (std::size_t ky = 0; ky < K; ++ky) {
            for (std::size_t kx = 0; kx < K; ++kx) {
              wflip(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>((co * K + ky) * K + kx)) =
                  wv.data[((co * cin + ci) * K + (K - 1 - ky)) * K + (K - 1 - kx)];
            }
          }
        }
      }
    }
    for (std::size_t n = 0; n < xv.n; ++n) {
      CMapMat<T> gmat(g.data.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
                      static_cast<Eigen::Index>(hw));
      if (need_b) {
        Tensor<T>& db = t.grad_buffer(bias);
        for (std::size_t co = 0; co < cout; ++co) {
          const T* row = g.data.data() + (n * cout + co) * hw;
          T acc = T(0);
          for (std::size_t i = 0; i < hw; ++i) acc += row[i];
          db.data[co] += acc;
        }
      }
      const T* img = xv.data.data() + n * cin * hw;
      if (k == 1) {
        CMapMat<T> cmat(img, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(hw));
        if (need_w) {
          MapMat<T> dw(t.grad_buffer(weight).data.data(), static_cast<Eigen::Index>(cout),
                       static_cast<Eigen::Index>(kk));
          dw.noalias() += gmat * cmat.transpose();
        }
        if (need_x) {
          MapMat<T> dxmat(t.grad_buffer(x).data.data() + n * cin * hw, static_cast<Eigen::Index>(kk),
                          static_cast<Eigen::Index>(hw));
          dxmat.noalias() += wmat.transpose() * gmat;
        }
        continue;
      }
      if (need_w) {
        MapMat<T> dw(t.grad_buffer(weight).data.data(), static_cast<Eigen::Index>(cout),
                     static_cast<Eigen::Index>(kk));
        for (std::size_t y0 = 0; y0 < xv.h; y0 += rows) {
          const std::size_t y1 = std::min(xv.h, y0 + rows);
          const auto len = static_cast<Eigen::Index>((y1 - y0) * xv.w);
          im2col(img, cin, xv.h, xv.w, k, pad, y0, y1, cols.data());
          dw.noalias() += gmat.middleCols(static_cast<Eigen::Index>(y0 * xv.w), len) *
                          CMapMat<T>(cols.data(), static_cast<Eigen::Index>(kk), len).transpose();
        }
      }
      if (need_x) {
        MapMat<T> dxmat(t.grad_buffer(x).data.data() + n * cin * hw, static_cast<Eigen::Index>(cin),
                        static_cast<Eigen::Index>(hw));
        const T* gimg = g.data.data() + n * cout * hw;
        for (std::size_t y0 = 0; y0 < xv.h; y0 += rows_t) {
          const std::size_t y1 = std::min(xv.h, y0 + rows_t);
          const auto len = static_cast<Eigen::Index>((y1 - y0) * xv.w);
          im2col(gimg, cout, xv.h, xv.w, k, pad, y0, y1, gcols.data());
          dxmat.middleCols(static_cast<Eigen::Index>(y0 * xv.w), len).noalias() +=
              wflip * CMapMat<T>(gcols.data(), static_cast<Eigen::Index>(kk_t), len);
        }
      }
    }
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return tape.push(std::move(out), tape.requires_grad(x), [x](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& xv = t.value(x);
    Tensor<T>& dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv.data[i] > T(0)) dx.data[i] += g.data[i];
    }
  });
}

template <typename T>
Var max_pool2(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  if (xv.h % 2 != 0 || xv.w % 2 != 0) throw InvalidInput("max_pool2: spatial dims must be even");
  Tensor<T> out(xv.n, xv.c, xv.h / 2, xv.w / 2);
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t p = 0; p < xv.n * xv.c; ++p) {
    const std::size_t in_off = p * xv.plane();
    const std::size_t out_off = p * out.plane();
    for (std::size_t y = 0; y < out.h; ++y) {
      for (std::size_t xcol = 0; xcol < out.w; ++xcol) {
        std::size_t best = in_off + (2 * y) * xv.w + 2 * xcol;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = in_off + (2 * y + dy) * xv.w + 2 * xcol + dx;
            if (xv.data[idx] > xv.data[best]) best = idx;
          }
        }
        out.data[out_off + y * out.w + xcol] = xv.data[best];
        argmax[out_off + y * out.w + xcol] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return tape.push(std::move(out), tape.requires_grad(x),
                   [x, argmax = std::move(argmax)](Tape<T>& t, const Tensor<T>& g) {
                     Tensor<T>& dx = t.grad_buffer(x);
                     for (std::size_t i = 0; i < g.size(); ++i) dx.data[argmax[i]] += g.data[i];
                   });
}

template <typename T>
Var upsample2(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> out(xv.n, xv.c, xv.h * 2, xv.w * 2);
  for (std::size_t p = 0; p < xv.n * xv.c; ++p) {
    const T* in = xv.data.data() + p * xv.plane();
    T* o = out.data.data() + p * out.plane();
    for (std::size_t y = 0; y < out.h; ++y) {
      for (std::size_t xc = 0; xc < out.w; ++xc) o[y * out.w + xc] = in[(y / 2) * xv.w + xc / 2];
    }
  }
  return tape.push(std::move(out), tape.requires_grad(x), [x](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& dx = t.grad_buffer(x);
    for (std::size_t p = 0; p < dx.n * dx.c; ++p) {
      T* d = dx.data.data() + p * dx.plane();
      const T* gi = g.data.data() + p * g.plane();
      for (std::size_t y = 0; y < g.h; ++y) {
        for (std::size_t xc = 0; xc < g.w; ++xc) d[(y / 2) * dx.w + xc / 2] += gi[y * g.w + xc];
      }
    }
  });
}

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (av.n != bv.n || av.h != bv.h || av.w != bv.w) {
    throw InvalidInput("concat_channels: batch or spatial dims differ");
  }
  Tensor<T> out(av.n, av.c + bv.c, av.h, av.w);
  const std::size_t pa = av.c * av.plane(), pb = bv.c * bv.plane();
  for (std::size_t n = 0; n < av.n; ++n) {
    std::copy_n(av.data.data() + n * pa, pa, out.data.data() + n * (pa + pb));
    std::copy_n(bv.data.data() + n * pb, pb, out.data.data() + n * (pa + pb) + pa);
  }
  return tape.push(std::move(out), tape.requires_grad({a, b}),
                   [a, b, pa, pb](Tape<T>& t, const Tensor<T>& g) {
                     const std::size_t batch = g.n;
                     if (t.requires_grad(a)) {
                       Tensor<T>& da = t.grad_buffer(a);
                       for (std::size_t n = 0; n < batch; ++n) {
                         for (std::size_t i = 0; i < pa; ++i) da.data[n * pa + i] += g.data[n * (pa + pb) + i];
                       }
                     }
                     if (t.requires_grad(b)) {
                       Tensor<T>& db = t.grad_buffer(b);
                       for (std::size_t n = 0; n < batch; ++n) {
                         for (std::size_t i = 0; i < pb; ++i) db.data[n * pb + i] += g.data[n * (pa + pb) + pa + i];
                       }
                     }
                   });
}

template <typename T>
Var softmax_channels(Tape<T>& tape, Var logits) {
  const Tensor<T>& xv = tape.value(logits);
  Tensor<T> out(xv.n, xv.c, xv.h, xv.w);
  const std::size_t hw = xv.plane();
  for (std::size_t n = 0; n < xv.n; ++n) {
    const std::size_t base = n * xv.c * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      T mx = xv.data[base + p];
      for (std::size_t c = 1; c < xv.c; ++c) mx = std::max(mx, xv.data[base + c * hw + p]);
      T sum = 0;
      for (std::size_t c = 0; c < xv.c; ++c) {
        const T e = std::exp(xv.data[base + c * hw + p] - mx);
        out.data[base + c * hw + p] = e;
        sum += e;
      }
      for (std::size_t c = 0; c < xv.c; ++c) out.data[base + c * hw + p] /= sum;
    }
  }
  const bool rg = tape.requires_grad(logits);
  const std::size_t self = tape.size();
  return tape.push(std::move(out), rg, [logits, self](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& pv = t.value(Var{self});
    Tensor<T>& dx = t.grad_buffer(logits);
    const std::size_t hw = pv.plane();
    for (std::size_t n = 0; n < pv.n; ++n) {
      const std::size_t base = n * pv.c * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        T dot = 0;
        for (std::size_t c = 0; c < pv.c; ++c) dot += pv.data[base + c * hw + p] * g.data[base + c * hw + p];
        for (std::size_t c = 0; c < pv.c; ++c) {
          const std::size_t i = base + c * hw + p;
          dx.data[i] += pv.data[i] * (g.data[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.data) v *= factor;
  return tape.push(std::move(out), tape.requires_grad(x), [x, factor](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += factor * g.data[i];
  });
}

template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, const Tensor<T>& weights) {
  const Tensor<T>& xv = tape.value(x);
  if (!xv.same_shape(weights)) throw InvalidInput("weighted_sum: weight shape differs");
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv.data[i]) * weights.data[i];
  Tensor<T> out(1, 1, 1, 1, static_cast<T>(acc));
  return tape.push(std::move(out), tape.requires_grad(x), [x, weights](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += g.data[0] * weights.data[i];
  });
}

template <typename T>
Var seg_loss(Tape<T>& tape, Var probs, std::span<const std::uint8_t> labels, Reduction reduction,
             double eps) {
  const Tensor<T>& pv = tape.value(probs);
  const std::size_t N = pv.n, C = pv.c, HW = pv.plane();
  if (labels.size() != N * HW) throw InvalidInput("seg_loss: label count does not match probabilities");
  for (std::uint8_t l : labels) {
    if (l >= C) throw InvalidInput("seg_loss: label outside [0, C)");
  }
  constexpr double kTiny = 1e-12;

  // Per-sample, per-class sums needed by the Dice backward pass.
  std::vector<double> inter(N * C, 0.0), psum(N * C, 0.0), gsum(N * C, 0.0);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const std::uint8_t* lab = labels.data() + n * HW;
    double ce = 0.0;
    for (std::size_t p = 0; p < HW; ++p) {
      ce -= std::log(std::max(static_cast<double>(pv.data[(n * C + lab[p]) * HW + p]), kTiny));
      gsum[n * C + lab[p]] += 1.0;
    }
    for (std::size_t c = 0; c < C; ++c) {
      const T* pc = pv.data.data() + (n * C + c) * HW;
      double s = 0.0, in = 0.0;
      for (std::size_t p = 0; p < HW; ++p) {
        s += pc[p];
        if (lab[p] == c) in += pc[p];
      }
      psum[n * C + c] = s;
      inter[n * C + c] = in;
    }
    double dice = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = n * C + c;
      dice += (2.0 * inter[k] + eps) / (psum[k] + gsum[k] + eps);
    }
    total += ce / static_cast<double>(HW) + 1.0 - dice / static_cast<double>(C);
  }
  const double norm = reduction == Reduction::kMean ? 1.0 / static_cast<double>(N) : 1.0;
  Tensor<T> out(1, 1, 1, 1, static_cast<T>(total * norm));

  std::vector<std::uint8_t> lab_copy(labels.begin(), labels.end());
  return tape.push(
      std::move(out), tape.requires_grad(probs),
      [probs, lab = std::move(lab_copy), inter = std::move(inter), psum = std::move(psum),
       gsum = std::move(gsum), norm, eps](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& pv = t.value(probs);
        Tensor<T>& dp = t.grad_buffer(probs);
        const std::size_t N = pv.n, C = pv.c, HW = pv.plane();
        const double up = static_cast<double>(g.data[0]) * norm;
        for (std::size_t n = 0; n < N; ++n) {
          const std::uint8_t* l = lab.data() + n * HW;
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t k = n * C + c;
            const double den = psum[k] + gsum[k] + eps;
            const double num = 2.0 * inter[k] + eps;
            // d/dp of -(1/C) * num/den
            const double d_in = -2.0 / (static_cast<double>(C) * den);
            const double d_all = num / (static_cast<double>(C) * den * den);
            const std::size_t off = k * HW;
            for (std::size_t p = 0; p < HW; ++p) {
              double d = d_all;
              if (l[p] == c) {
                d += d_in;
                const double pval = pv.data[off + p];
                if (pval > kTiny) d -= 1.0 / (pval * static_cast<double>(HW));
              }
              dp.data[off + p] += static_cast<T>(up * d);
            }
          }
        }
      });
}

#define SLAUG_INSTANTIATE_TAPE(T)                                                                 \
  template class Tape<T>;                                                                         \
  template Var conv2d<T>(Tape<T>&, Var, Var, Var, int);                                           \
  template Var relu<T>(Tape<T>&, Var);                                                            \
  template Var max_pool2<T>(Tape<T>&, Var);                                                       \
  template Var upsample2<T>(Tape<T>&, Var);                                                       \
  template Var concat_channels<T>(Tape<T>&, Var, Var);                                            \
  template Var softmax_channels<T>(Tape<T>&, Var);                                                \
  template Var scale<T>(Tape<T>&, Var, T);                                                        \
  template Var weighted_sum<T>(Tape<T>&, Var, const Tensor<T>&);                                  \
  template Var seg_loss<T>(Tape<T>&, Var, std::span<const std::uint8_t>, Reduction, double);

SLAUG_INSTANTIATE_TAPE(float)
SLAUG_INSTANTIATE_TAPE(double)

#undef SLAUG_INSTANTIATE_TAPE

}  // namespace slaug::nn
