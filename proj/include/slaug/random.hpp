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

#include <cstdint>
#include <limits>
#include <string_view>

namespace slaug {

/**
 * @brief Counter-based random stream.
 *
 * Output i is a stateless mix of (key, i), so a stream is fully described by
 * its key and counter. Child streams are keyed by hashing (parent key, label);
 * they do not depend on how many values the parent has drawn, which lets
 * paired pipelines replay identical sub-streams.
 *
 * Only integer arithmetic and IEEE-exact operations are used to produce
 * uniforms, so sequences are identical across platforms. Normal draws go
 * through std::log / std::cos and match wherever libm does.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0) noexcept;

  /// Independent stream derived from this stream's key and `label`.
  RandomStream child(std::uint64_t label) const noexcept;
  RandomStream child(std::string_view label) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Standard normal via Box-Muller (one value per call, no cached pair).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // UniformRandomBitGenerator
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u64(); }

 private:
  RandomStream(std::uint64_t key, std::uint64_t counter, int) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace slaug
