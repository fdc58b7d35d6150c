#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace deocc {

/// Dense vector of finite reals. Construction rejects NaN/Inf and empty input.
class Vector {
 public:
  explicit Vector(std::vector<double> data);
  Vector(std::initializer_list<double> values);
  static Vector zeros(std::size_t dim);

  std::size_t dim() const { return data_.size(); }
  double operator[](std::size_t k) const { return data_[k]; }
  std::span<const double> values() const { return data_; }

  Vector operator-(const Vector& other) const;
  Vector operator+(const Vector& other) const;
  Vector operator*(double c) const;

 private:
  std::vector<double> data_;
};

/// Row-major dense matrix of finite reals. A matrix with zero rows is allowed
/// (it represents an empty collection, e.g. the attention of an empty mask).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  Vector row_vector(std::size_t r) const;

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

  // Throws InvalidInput if any entry is NaN/Inf. Used after in-place edits.
  void check_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix operator*(double c) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(const Vector& a, const Vector& b);
double dot(std::span<const double> a, std::span<const double> b);

double l2_norm(const Vector& a);
double l2_norm(std::span<const double> a);

/// Huber penalty on the scalar residual a - b.
double huber(double a, double b, double delta);

/// d huber(a, b, delta) / d a. The derivative with respect to b is its negation.
double huber_derivative(double a, double b, double delta);

/// softmax(scale * scores), computed with max-subtraction.
Vector softmax_scaled(const Vector& scores, double scale);
std::vector<double> softmax_scaled(std::span<const double> scores, double scale);

/// Central-difference gradient oracle: (f(x + h e_k) - f(x - h e_k)) / 2h.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h);
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double h);

/// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2, floor).
double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                               double floor = 1e-8);

}  // namespace deocc
