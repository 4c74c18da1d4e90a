// Copyright 2026 The Fed3CR Authors.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "fed3cr/errors.hpp"

namespace fed3cr {

template <typename T>
class BasicVector {
 public:
  using value_type = T;

  BasicVector() = default;
  explicit BasicVector(std::size_t dim, T fill = T(0)) : data_(dim, fill) {}
  BasicVector(std::initializer_list<T> values) : data_(values) {}
  explicit BasicVector(std::vector<T> values) : data_(std::move(values)) {}

  std::size_t dim() const { return data_.size(); }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  const std::vector<T>& values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const BasicVector&) const = default;

 private:
  std::vector<T> data_;
};

// Row-major dense matrix. Rows are items throughout the library.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length does not match rows x cols");
    }
  }
  // Nested-list construction, mostly for tests: {{1, 2}, {3, 4}}.
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const BasicMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Vector = BasicVector<double>;
using Matrix = BasicMatrix<double>;
using VectorF = BasicVector<float>;
using MatrixF = BasicMatrix<float>;

inline std::string shape_string(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void require_same_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                        const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T norm2(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

// Mutable-span forms.
template <typename T>
  requires(!std::is_const_v<T>)
T dot(std::span<T> a, std::span<T> b) {
  return dot(std::span<const T>(a), std::span<const T>(b));
}

template <typename T>
  requires(!std::is_const_v<T>)
T norm2(std::span<T> a) {
  return norm2(std::span<const T>(a));
}

// a * b.
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.rows(), a.cols()) + " x " +
                     shape_string(b.rows(), b.cols()));
  }
  BasicMatrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const T* brow = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

// a * b^T.
template <typename T>
BasicMatrix<T> matmul_bt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_bt: " + shape_string(a.rows(), a.cols()) +
                     " x (" + shape_string(b.rows(), b.cols()) + ")^T");
  }
  BasicMatrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = dot(a.row(i), b.row(j));
    }
  }
  return out;
}

// a^T * b.
template <typename T>
BasicMatrix<T> matmul_at(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_at: (" + shape_string(a.rows(), a.cols()) +
                     ")^T x " + shape_string(b.rows(), b.cols()));
  }
  BasicMatrix<T> out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* arow = a.row(r).data();
    const T* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ai = arow[i];
      T* o = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += ai * brow[j];
    }
  }
  return out;
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
BasicVector<T> matvec(const BasicMatrix<T>& a, std::type_identity_t<std::span<const T>> x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  BasicVector<T> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

template <typename T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require_same_shape(a, b, "add");
  BasicMatrix<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

template <typename T>
BasicMatrix<T> scaled(const BasicMatrix<T>& a, T s) {
  BasicMatrix<T> out = a;
  for (auto& v : out.span()) v *= s;
  return out;
}

// dst += s * src, elementwise.
template <typename T>
void axpy(T s, std::span<const T> src, std::span<T> dst) {
  if (src.size() != dst.size()) throw ShapeError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += s * src[i];
}

template <typename T>
T frobenius_norm(const BasicMatrix<T>& a) {
  return norm2(a.span());
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
bool all_finite(const BasicMatrix<T>& m) {
  return all_finite(m.span());
}

template <typename T>
bool all_finite(const BasicVector<T>& v) {
  return all_finite(v.span());
}

// Cosine of the angle between a and b. A zero-norm operand yields 0 and sets
// *degenerate.
template <typename T>
T cosine_similarity(std::span<const T> a, std::span<const T> b,
                    bool* degenerate = nullptr) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: dims differ");
  const T na = norm2(a);
  const T nb = norm2(b);
  if (!(na > T(0)) || !(nb > T(0))) {
    if (degenerate != nullptr) *degenerate = true;
    return T(0);
  }
  T c = dot(a, b) / (na * nb);
  return std::clamp(c, T(-1), T(1));
}

template <typename T>
T cosine_similarity(const BasicVector<T>& a, const BasicVector<T>& b,
                    bool* degenerate = nullptr) {
  return cosine_similarity(a.span(), b.span(), degenerate);
}

// Max-shifted softmax.
template <typename T>
BasicVector<T> softmax(std::span<const T> scores) {
  BasicVector<T> out(scores.size());
  if (scores.empty()) return out;
  const T mx = *std::max_element(scores.begin(), scores.end());
  T sum = T(0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
BasicVector<T> softmax(const BasicVector<T>& scores) {
  return softmax(scores.span());
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
BasicMatrix<T> cast_matrix(const BasicMatrix<double>& m) {
  std::vector<T> data(m.values().begin(), m.values().end());
  return BasicMatrix<T>(m.rows(), m.cols(), std::move(data));
}

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Central-difference check of analytic_grad against f at params. Entries whose
// larger magnitude is at or below 1e-8 are skipped. Throws RuntimeFailure when
// f is non-finite at a perturbed point.
GradCheckReport grad_check(const std::function<double(const Matrix&)>& f,
                           const Matrix& params, const Matrix& analytic_grad,
                           double eps, double rtol);

}  // namespace fed3cr
