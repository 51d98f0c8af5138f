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

#include "fastslow/numerics.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "fastslow/kernels.h"

namespace fastslow::num {
namespace {

template <typename T>
T log_sum_exp_impl(std::span<const T> values) {
  if (values.empty()) throw std::invalid_argument("empty reduction");
  T m = values[0];
  for (T v : values) m = std::max(m, v);
  if (!std::isfinite(m)) {
    // All -inf stays -inf; any +inf or NaN propagates.
    return m;
  }
  T acc = T(0);
  for (T v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

template <typename T>
std::vector<T> log_softmax_impl(std::span<const T> values) {
  if (values.empty()) throw std::invalid_argument("empty reduction");
  for (T v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("log_softmax: non-finite input");
  }
  const T lse = log_sum_exp_impl(values);
  std::vector<T> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] - lse;
  return out;
}

}  // namespace

double log_sum_exp(std::span<const double> values) { return log_sum_exp_impl(values); }
float log_sum_exp(std::span<const float> values) { return log_sum_exp_impl(values); }

std::vector<double> log_softmax(std::span<const double> values) {
  return log_softmax_impl(values);
}
std::vector<float> log_softmax(std::span<const float> values) {
  return log_softmax_impl(values);
}

// The visible keys are packed into contiguous scratch in ascending key
// order before any reduction. That keeps the summation order a function of
// the visible subsequence alone, so a streaming pass (dense short window)
// and an offline pass (masked long window) produce identical bits for the
// same visible set.
Matrix multi_head_attention(const Matrix& queries, const Matrix& keys,
                            const Matrix& values, int num_heads,
                            const AttentionMask* mask) {
  if (queries.cols != keys.cols || keys.rows != values.rows) {
    throw std::invalid_argument("attention: dimension mismatch");
  }
  if (num_heads < 1 || queries.cols % static_cast<std::size_t>(num_heads) != 0 ||
      values.cols % static_cast<std::size_t>(num_heads) != 0) {
    throw std::invalid_argument("attention: head count must divide model dims");
  }
  if (mask != nullptr && (mask->rows != queries.rows || mask->cols != keys.rows)) {
    throw std::invalid_argument("attention: mask shape mismatch");
  }

  const std::size_t head_dim = queries.cols / static_cast<std::size_t>(num_heads);
  const std::size_t value_head_dim = values.cols / static_cast<std::size_t>(num_heads);
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(head_dim));

  Matrix out(queries.rows, values.cols, 0.0f);
  std::vector<std::uint32_t> visible;
  std::vector<float> logits;
  visible.reserve(keys.rows);
  logits.reserve(keys.rows);

  for (std::size_t qi = 0; qi < queries.rows; ++qi) {
    visible.clear();
    if (mask == nullptr) {
      for (std::size_t kj = 0; kj < keys.rows; ++kj) visible.push_back(kj);
    } else {
      for (std::size_t kj = 0; kj < keys.rows; ++kj) {
        if (mask->at(qi, kj)) visible.push_back(kj);
      }
    }
    if (visible.empty()) throw std::invalid_argument("no visible context");

    for (int h = 0; h < num_heads; ++h) {
      const std::size_t off = static_cast<std::size_t>(h) * head_dim;
      const std::size_t v_off = static_cast<std::size_t>(h) * value_head_dim;
      const float* q = queries.row(qi) + off;

      logits.clear();
      for (std::uint32_t kj : visible) {
        logits.push_back(kernels::dot(q, keys.row(kj) + off, head_dim) * inv_sqrt_d);
      }
      const float m = kernels::max(logits.data(), logits.size());
      for (float& l : logits) l = std::exp(l - m);
      const float denom = kernels::sum(logits.data(), logits.size());

      float* o = out.row(qi) + v_off;
      for (std::size_t i = 0; i < visible.size(); ++i) {
        kernels::axpy(value_head_dim, logits[i], values.row(visible[i]) + v_off, o);
      }
      kernels::scale(value_head_dim, 1.0f / denom, o);
    }
  }

  for (float v : out.data) {
    if (!std::isfinite(v)) throw std::runtime_error("attention: non-finite output");
  }
  return out;
}

Matrix masked_attention(const Matrix& queries, const Matrix& keys,
                        const Matrix& values, const AttentionMask& mask) {
  return multi_head_attention(queries, keys, values, 1, &mask);
}

void layer_norm_row(std::span<float> x, std::span<const float> gain,
                    std::span<const float> bias, float eps) {
  const std::size_t n = x.size();
  if (gain.size() != n || bias.size() != n) {
    throw std::invalid_argument("layer_norm: parameter size mismatch");
  }
  const float mean = kernels::sum(x.data(), n) / static_cast<float>(n);
  float var = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const float d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<float>(n);
  const float inv = 1.0f / std::sqrt(var + eps);
  for (std::size_t i = 0; i < n; ++i) x[i] = gain[i] * (x[i] - mean) * inv + bias[i];
}

Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> bias) {
  if (x.cols != w.rows) throw std::invalid_argument("linear: inner dimension mismatch");
  if (!bias.empty() && bias.size() != w.cols) {
    throw std::invalid_argument("linear: bias size mismatch");
  }
  Matrix out(x.rows, w.cols, 0.0f);
  if (!bias.empty()) {
    for (std::size_t i = 0; i < out.rows; ++i) {
      std::copy(bias.begin(), bias.end(), out.row(i));
    }
  }
  kernels::matmul_acc(x.rows, x.cols, w.cols, x.data.data(), w.data.data(),
                      out.data.data());
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  return linear(a, b, {});
}

}  // namespace fastslow::num
