// Copyright 2026 The Fastslow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FASTSLOW_TESTS_TESTING_TEST_UTIL_H_
#define FASTSLOW_TESTS_TESTING_TEST_UTIL_H_

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fastslow/matrix.h"

namespace fastslow::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            float scale = 1.0f) {
  Matrix m(rows, cols);
  for (float& v : m.data) v = static_cast<float>(uniform(rng, -scale, scale));
  return m;
}

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n,
                                        float scale = 1.0f) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(uniform(rng, -scale, scale));
  return v;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return 1e30;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  }
  return worst;
}

// Plain Wagner-Fischer distance, no traceback; the independent check for
// the metrics module.
inline long edit_distance_oracle(const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  std::vector<long> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<long>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace fastslow::testing

#endif  // FASTSLOW_TESTS_TESTING_TEST_UTIL_H_
