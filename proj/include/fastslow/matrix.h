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

#ifndef FASTSLOW_MATRIX_H_
#define FASTSLOW_MATRIX_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace fastslow {

// Dense row-major f32 matrix. Value type, no views into foreign storage.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  bool empty() const { return rows == 0 || cols == 0; }

  float* row(std::size_t i) { return data.data() + i * cols; }
  const float* row(std::size_t i) const { return data.data() + i * cols; }

  std::span<float> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const float> row_span(std::size_t i) const { return {row(i), cols}; }

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  // Rows [begin, end) copied out.
  Matrix slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows) throw std::out_of_range("Matrix::slice_rows");
    Matrix out(end - begin, cols);
    std::copy(data.begin() + begin * cols, data.begin() + end * cols,
              out.data.begin());
    return out;
  }

  void append_rows(const Matrix& other) {
    if (other.empty()) return;
    if (empty()) {
      *this = other;
      return;
    }
    if (other.cols != cols) throw std::invalid_argument("Matrix::append_rows: column mismatch");
    data.insert(data.end(), other.data.begin(), other.data.end());
    rows += other.rows;
  }

  // Drops all but the last `keep` rows.
  void trim_front_rows(std::size_t keep) {
    if (rows <= keep) return;
    data.erase(data.begin(), data.begin() + (rows - keep) * cols);
    rows = keep;
  }
};

// Boolean query-by-key visibility mask; true means attention is allowed.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  AttentionMask() = default;
  AttentionMask(std::size_t r, std::size_t c, bool value = false)
      : rows(r), cols(c), allowed(r * c, value ? 1 : 0) {}

  bool at(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { allowed[r * cols + c] = v ? 1 : 0; }

  static AttentionMask all_visible(std::size_t r, std::size_t c) {
    return AttentionMask(r, c, true);
  }
};

}  // namespace fastslow

#endif  // FASTSLOW_MATRIX_H_
