#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "moyal_lab/errors.hpp"

namespace moyal {

/// Dense row-major matrix. Rows index x, columns index p throughout the library.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ContractError("matrix data size does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  Matrix& operator+=(const Matrix& o) {
    check_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, T s) { return a *= s; }
  friend Matrix operator*(T s, Matrix a) { return a *= s; }

  bool operator==(const Matrix&) const = default;

 private:
  void check_shape(const Matrix& o) const {
    if (!same_shape(o)) throw ContractError("matrix shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;

inline double max_abs(const RealMatrix& m) {
  double r = 0.0;
  for (double v : m.flat()) r = std::max(r, std::abs(v));
  return r;
}

inline double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
  if (!a.same_shape(b)) throw ContractError("matrix shape mismatch");
  double r = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) r = std::max(r, std::abs(a.flat()[k] - b.flat()[k]));
  return r;
}

/// Plain Euclidean norm of the entries (no quadrature weights).
inline double frobenius(const RealMatrix& m) {
  double s = 0.0;
  for (double v : m.flat()) s += v * v;
  return std::sqrt(s);
}

/// ||a - b|| / ||b||.
inline double relative_l2(const RealMatrix& a, const RealMatrix& b) {
  if (!a.same_shape(b)) throw ContractError("matrix shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.flat()[k] - b.flat()[k];
    num += d * d;
    den += b.flat()[k] * b.flat()[k];
  }
  return std::sqrt(num / den);
}

}  // namespace moyal
