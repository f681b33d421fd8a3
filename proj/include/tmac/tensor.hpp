#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tmac {

/// Dense row-major 2-D array of doubles.
///
/// A Tensor is a plain value: copying copies the data, and nothing here
/// records gradients. Differentiable computation goes through `Tape`/`Var`
/// (see tape.hpp), which store Tensors as node values.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }
  static Tensor column(std::span<const double> values);
  static Tensor row_vector(std::span<const double> values);
  static Tensor identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Tensor& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  /// Scalar value of a 1x1 tensor.
  double item() const;

  bool all_finite() const noexcept;
  std::string shape_string() const;

  /// Exact elementwise equality; shapes must match.
  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_of(const Tensor& t);

// Gradient-free kernels. All check shapes and throw DimensionError.

/// a (n x k) * b (k x m)
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T * b, without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a * b^T, without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// dst += src (same shape).
void add_inplace(Tensor& dst, const Tensor& src);
/// dst += alpha * src (same shape).
void axpy_inplace(Tensor& dst, double alpha, const Tensor& src);

double max_abs(const Tensor& t);

}  // namespace tmac
