// Copyright 2026 The xtrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace xtrans {

/// The engine is std::mt19937_64. The helpers below avoid the
/// implementation-defined std distributions so sample streams are identical
/// across standard libraries.
using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mixes a base seed with stream tags (domain, split, index, ...).
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> tags)
{
  uint64_t h = splitmix64(base);
  for (uint64_t t : tags)
    h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline double uniform01(Rng& rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi)
{
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline int64_t uniform_index(Rng& rng, int64_t n)
{
  const auto v = static_cast<int64_t>(uniform01(rng) * static_cast<double>(n));
  return v < n ? v : n - 1;
}

inline bool coin(Rng& rng, double p = 0.5)
{
  return uniform01(rng) < p;
}

/// Standard normal by Box-Muller (one draw per call).
inline double normal(Rng& rng)
{
  double u1 = uniform01(rng);
  while (u1 <= 0.0)
    u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::string rng_state(const Rng& rng)
{
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void set_rng_state(Rng& rng, const std::string& state)
{
  std::istringstream is(state);
  is >> rng;
}

} // namespace xtrans
