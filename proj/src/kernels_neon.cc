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

// aarch64 NEON variants, mirroring the AVX2 loop structure at 4 lanes.

#include "kernels_internal.h"

#if defined(FASTSLOW_HAVE_NEON_BUILD)

#include <arm_neon.h>

#include <algorithm>
#include <cstddef>

namespace fastslow::kernels {
namespace {

float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = vfmaq_f32(acc, vld1q_f32(a + i), vld1q_f32(b + i));
  }
  float s = vaddvq_f32(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

float sum_neon(const float* a, std::size_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vld1q_f32(a + i));
  float s = vaddvq_f32(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

float max_neon(const float* a, std::size_t n) {
  if (n < 4) {
    float m = a[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, a[i]);
    return m;
  }
  float32x4_t acc = vld1q_f32(a);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) acc = vmaxq_f32(acc, vld1q_f32(a + i));
  float m = vmaxvq_f32(acc);
  for (; i < n; ++i) m = std::max(m, a[i]);
  return m;
}

void axpy_neon(std::size_t n, float alpha, const float* x, float* y) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_neon(std::size_t n, float alpha, float* x) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmulq_f32(va, vld1q_f32(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void add_neon(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void relu_neon(std::size_t n, float* x) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmaxq_f32(zero, vld1q_f32(x + i)));
  for (; i < n; ++i) x[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void matmul_acc_neon(std::size_t m, std::size_t k, std::size_t n,
                     const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float32x4_t va = vdupq_n_f32(arow[p]);
      const float* brow = b + p * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        vst1q_f32(crow + j, vfmaq_f32(vld1q_f32(crow + j), va, vld1q_f32(brow + j)));
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable t = {dot_neon,  sum_neon,   max_neon,
                                axpy_neon, scale_neon, add_neon,
                                relu_neon, matmul_acc_neon};
  return t;
}

}  // namespace fastslow::kernels

#endif  // FASTSLOW_HAVE_NEON_BUILD
