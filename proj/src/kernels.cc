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

#include "fastslow/kernels.h"

#include <stdexcept>
#include <string>

#include "kernels_internal.h"

namespace fastslow::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(FASTSLOW_HAVE_AVX2_BUILD) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return &scalar_table();
    case Backend::kAvx2:
#if defined(FASTSLOW_HAVE_AVX2_BUILD)
      return cpu_has_avx2_fma() ? &avx2_table() : nullptr;
#else
      return nullptr;
#endif
    case Backend::kNeon:
#if defined(FASTSLOW_HAVE_NEON_BUILD)
      return &neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Backend pick_default() {
#if defined(FASTSLOW_HAVE_NEON_BUILD)
  return Backend::kNeon;
#else
  return cpu_has_avx2_fma() ? Backend::kAvx2 : Backend::kScalar;
#endif
}

struct Dispatch {
  Backend backend;
  const KernelTable* table;
  Dispatch() : backend(pick_default()), table(table_for(backend)) {}
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "?";
}

bool backend_supported(Backend b) { return table_for(b) != nullptr; }

Backend active_backend() { return dispatch().backend; }

void set_backend(Backend b) {
  const KernelTable* t = table_for(b);
  if (t == nullptr) {
    throw std::invalid_argument(std::string("kernel backend unsupported on this host: ") +
                                backend_name(b));
  }
  dispatch().backend = b;
  dispatch().table = t;
}

float dot(const float* a, const float* b, std::size_t n) {
  return dispatch().table->dot(a, b, n);
}
float sum(const float* a, std::size_t n) { return dispatch().table->sum(a, n); }
float max(const float* a, std::size_t n) { return dispatch().table->max(a, n); }
void axpy(std::size_t n, float alpha, const float* x, float* y) {
  dispatch().table->axpy(n, alpha, x, y);
}
void scale(std::size_t n, float alpha, float* x) { dispatch().table->scale(n, alpha, x); }
void add(std::size_t n, const float* x, float* y) { dispatch().table->add(n, x, y); }
void relu(std::size_t n, float* x) { dispatch().table->relu(n, x); }
void matmul_acc(std::size_t m, std::size_t k, std::size_t n, const float* a,
                const float* b, float* c) {
  dispatch().table->matmul_acc(m, k, n, a, b, c);
}

}  // namespace fastslow::kernels
