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

// Equivalence between the scalar reference kernels and whatever SIMD
// backend this host dispatches to. Sizes straddle the vector width so the
// remainder loops are exercised.

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fastslow/kernels.h"
#include "testing/test_util.h"

using namespace fastslow;
namespace kn = fastslow::kernels;

namespace {

struct BackendGuard {
  kn::Backend saved;
  BackendGuard() : saved(kn::active_backend()) {}
  ~BackendGuard() { kn::set_backend(saved); }
};

const std::vector<std::size_t> kSizes = {1, 2, 3, 7, 8, 9, 15, 16, 17, 64, 100, 257};

}  // namespace

TEST_CASE("simd backend agrees with scalar reference") {
  BackendGuard guard;
  const kn::Backend simd = guard.saved;
  if (simd == kn::Backend::kScalar) {
    MESSAGE("no SIMD backend on this host; scalar-only");
    return;
  }

  std::mt19937_64 rng(42);
  for (std::size_t n : kSizes) {
    auto a = testing::random_vector(rng, n, 2.0f);
    auto b = testing::random_vector(rng, n, 2.0f);

    kn::set_backend(kn::Backend::kScalar);
    const float dot_ref = kn::dot(a.data(), b.data(), n);
    const float sum_ref = kn::sum(a.data(), n);
    const float max_ref = kn::max(a.data(), n);
    auto axpy_ref = b;
    kn::axpy(n, 0.37f, a.data(), axpy_ref.data());
    auto relu_ref = a;
    kn::relu(n, relu_ref.data());

    kn::set_backend(simd);
    const float dot_simd = kn::dot(a.data(), b.data(), n);
    const float sum_simd = kn::sum(a.data(), n);
    const float max_simd = kn::max(a.data(), n);
    auto axpy_simd = b;
    kn::axpy(n, 0.37f, a.data(), axpy_simd.data());
    auto relu_simd = a;
    kn::relu(n, relu_simd.data());

    const float tol = 1e-5f * static_cast<float>(n);
    CHECK(std::abs(dot_ref - dot_simd) <= tol);
    CHECK(std::abs(sum_ref - sum_simd) <= tol);
    CHECK(max_ref == max_simd);  // max is order-insensitive, exactly
    CHECK(relu_ref == relu_simd);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(axpy_ref[i] - axpy_simd[i]) <= 1e-6f);
    }
  }
}

TEST_CASE("matmul_acc backends agree") {
  BackendGuard guard;
  const kn::Backend simd = guard.saved;
  if (simd == kn::Backend::kScalar) return;

  std::mt19937_64 rng(7);
  const std::vector<std::array<std::size_t, 3>> shapes = {
      {1, 1, 1}, {3, 5, 7}, {4, 16, 8}, {5, 33, 17}, {8, 8, 64}};
  for (const auto& [m, k, n] : shapes) {
    auto a = testing::random_vector(rng, m * k);
    auto b = testing::random_vector(rng, k * n);

    std::vector<float> c_ref(m * n, 0.5f);
    std::vector<float> c_simd = c_ref;
    kn::set_backend(kn::Backend::kScalar);
    kn::matmul_acc(m, k, n, a.data(), b.data(), c_ref.data());
    kn::set_backend(simd);
    kn::matmul_acc(m, k, n, a.data(), b.data(), c_simd.data());

    for (std::size_t i = 0; i < c_ref.size(); ++i) {
      CHECK(std::abs(c_ref[i] - c_simd[i]) <= 1e-5f * static_cast<float>(k + 1));
    }
  }
}

TEST_CASE("kernels are deterministic per backend") {
  std::mt19937_64 rng(3);
  const auto a = testing::random_vector(rng, 1000);
  const auto b = testing::random_vector(rng, 1000);
  const float first = kn::dot(a.data(), b.data(), a.size());
  for (int i = 0; i < 10; ++i) {
    CHECK(kn::dot(a.data(), b.data(), a.size()) == first);
  }
  const float s = kn::sum(a.data(), a.size());
  for (int i = 0; i < 10; ++i) CHECK(kn::sum(a.data(), a.size()) == s);
}

TEST_CASE("unsupported backend is rejected") {
#if !defined(__aarch64__)
  CHECK_THROWS_AS(kn::set_backend(kn::Backend::kNeon), std::invalid_argument);
#endif
  CHECK(kn::backend_supported(kn::Backend::kScalar));
}
