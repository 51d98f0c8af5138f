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

#ifndef FASTSLOW_KERNELS_H_
#define FASTSLOW_KERNELS_H_

#include <cstddef>

// Dense f32 primitives behind a runtime-dispatched backend. The scalar
// backend is the reference; AVX2/NEON variants are selected from CPU
// features at startup and must agree with scalar within float rounding
// (fused multiply-add and lane-wise partial sums change the last ulps,
// nothing more). A given backend is deterministic: same inputs, same bits.
namespace fastslow::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

const char* backend_name(Backend b);
bool backend_supported(Backend b);

// The backend picked at startup (best supported one).
Backend active_backend();

// Test hook. Not thread-safe; call before any compute threads exist.
// Throws std::invalid_argument if the backend is unsupported on this host.
void set_backend(Backend b);

float dot(const float* a, const float* b, std::size_t n);
float sum(const float* a, std::size_t n);
float max(const float* a, std::size_t n);  // n >= 1

// y += alpha * x
void axpy(std::size_t n, float alpha, const float* x, float* y);
// x *= alpha
void scale(std::size_t n, float alpha, float* x);
// y += x
void add(std::size_t n, const float* x, float* y);
void relu(std::size_t n, float* x);

// C (m x n) += A (m x k) * B (k x n), all row-major contiguous.
void matmul_acc(std::size_t m, std::size_t k, std::size_t n, const float* a,
                const float* b, float* c);

}  // namespace fastslow::kernels

#endif  // FASTSLOW_KERNELS_H_
