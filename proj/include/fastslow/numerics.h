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

#ifndef FASTSLOW_NUMERICS_H_
#define FASTSLOW_NUMERICS_H_

#include <span>
#include <vector>

#include "fastslow/matrix.h"

// Numeric substrate shared by the encoder, predictor, joiner and losses.
// Everything here is a pure function; call freely from multiple threads.
namespace fastslow::num {

// log(sum(exp(v))) with max shift, safe for large magnitudes.
// Throws std::invalid_argument("empty reduction") on an empty input.
double log_sum_exp(std::span<const double> values);
float log_sum_exp(std::span<const float> values);

// Throws on non-finite input.
std::vector<double> log_softmax(std::span<const double> values);
std::vector<float> log_softmax(std::span<const float> values);

// Scaled-dot attention with per-query visibility. Masked-out keys are
// excluded from the softmax normalizer, not zeroed after the fact, so a
// row's weights always sum to one over its visible set. A query row whose
// mask row is all false has no distribution to form; that throws
// std::invalid_argument("no visible context").
//
// Queries q (nq x d), keys k (nk x d), values v (nk x dv), mask (nq x nk).
Matrix masked_attention(const Matrix& queries, const Matrix& keys,
                        const Matrix& values, const AttentionMask& mask);

// Multi-head variant over concatenated head slices; mask == nullptr means
// everything visible. Head h of the output row is the attention over head h
// slices of keys/values; the value dim may differ from the key dim.
Matrix multi_head_attention(const Matrix& queries, const Matrix& keys,
                            const Matrix& values, int num_heads,
                            const AttentionMask* mask);

// x <- gain * (x - mean) / sqrt(var + eps) + bias, one row.
void layer_norm_row(std::span<float> x, std::span<const float> gain,
                    std::span<const float> bias, float eps = 1e-5f);

// y = x * w + bias  (x: m x k, w: k x n, bias: n or empty)
Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> bias);

// Plain product, zero-initialized accumulator.
Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace fastslow::num

#endif  // FASTSLOW_NUMERICS_H_
