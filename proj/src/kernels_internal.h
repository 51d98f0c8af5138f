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

#ifndef FASTSLOW_SRC_KERNELS_INTERNAL_H_
#define FASTSLOW_SRC_KERNELS_INTERNAL_H_

#include <cstddef>

namespace fastslow::kernels {

// One vtable per backend; kernels.cc owns selection.
struct KernelTable {
  float (*dot)(const float*, const float*, std::size_t);
  float (*sum)(const float*, std::size_t);
  float (*max)(const float*, std::size_t);
  void (*axpy)(std::size_t, float, const float*, float*);
  void (*scale)(std::size_t, float, float*);
  void (*add)(std::size_t, const float*, float*);
  void (*relu)(std::size_t, float*);
  void (*matmul_acc)(std::size_t, std::size_t, std::size_t, const float*,
                     const float*, float*);
};

const KernelTable& scalar_table();

#if defined(__x86_64__) || defined(__i386__) || defined(_M_X64)
#define FASTSLOW_HAVE_AVX2_BUILD 1
const KernelTable& avx2_table();
#endif

#if defined(__aarch64__)
#define FASTSLOW_HAVE_NEON_BUILD 1
const KernelTable& neon_table();
#endif

}  // namespace fastslow::kernels

#endif  // FASTSLOW_SRC_KERNELS_INTERNAL_H_
