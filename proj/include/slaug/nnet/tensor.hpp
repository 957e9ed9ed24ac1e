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
#pragma once

#include <cstddef>
#include <vector>

namespace slaug::nn {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return h * w; }
  bool empty() const noexcept { return data.empty(); }

  std::size_t index(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const noexcept {
    return ((in * c + ic) * h + ih) * w + iw;
  }
  T& at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) {
    return data[index(in, ic, ih, iw)];
  }
  T at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
    return data[index(in, ic, ih, iw)];
  }

  bool same_shape(const Tensor& o) const noexcept {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

}  // namespace slaug::nn
