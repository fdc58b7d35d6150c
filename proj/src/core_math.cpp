#include "deocc/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deocc/errors.hpp"

namespace deocc {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvalidInput(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace

Vector::Vector(std::vector<double> data) : data_(std::move(data)) {
  if (data_.empty()) throw InvalidInput("Vector: dimension must be >= 1");
  require_finite(data_, "Vector");
}

Vector::Vector(std::initializer_list<double> values) : Vector(std::vector<double>(values)) {}

Vector Vector::zeros(std::size_t dim) { return Vector(std::vector<double>(dim, 0.0)); }

Vector Vector::operator-(const Vector& other) const {
  if (dim() != other.dim()) throw InvalidInput("Vector: dimension mismatch");
  std::vector<double> out(dim());
  for (std::size_t k = 0; k < dim(); ++k) out[k] = data_[k] - other.data_[k];
  return Vector(std::move(out));
}

Vector Vector::operator+(const Vector& other) const {
  if (dim() != other.dim()) throw InvalidInput("Vector: dimension mismatch");
  std::vector<double> out(dim());
  for (std::size_t k = 0; k < dim(); ++k) out[k] = data_[k] + other.data_[k];
  return Vector(std::move(out));
}

Vector Vector::operator*(double c) const {
  std::vector<double> out(data_);
  for (double& v : out) v *= c;
  return Vector(std::move(out));
}

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw InvalidInput("Matrix: rows*cols != data length");
  require_finite(data_, "Matrix");
}

Vector Matrix::row_vector(std::size_t r) const {
  auto span = row(r);
  return Vector(std::vector<double>(span.begin(), span.end()));
}

void Matrix::check_finite() const { require_finite(data_, "Matrix"); }

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) throw InvalidInput("Matrix: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix Matrix::operator*(double c) const {
  Matrix out = *this;
  for (double& v : out.data_) v *= c;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double dot(const Vector& a, const Vector& b) { return dot(a.values(), b.values()); }

double l2_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return std::sqrt(acc);
}

double l2_norm(const Vector& a) { return l2_norm(a.values()); }

double huber(double a, double b, double delta) {
  if (!(delta > 0.0)) throw InvalidInput("huber: delta must be > 0");
  const double r = std::abs(a - b);
  if (r <= delta) return 0.5 * r * r;
  return delta * (r - 0.5 * delta);
}

double huber_derivative(double a, double b, double delta) {
  if (!(delta > 0.0)) throw InvalidInput("huber: delta must be > 0");
  const double r = a - b;
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

std::vector<double> softmax_scaled(std::span<const double> scores, double scale) {
  if (scores.empty()) throw InvalidInput("softmax_scaled: empty scores");
  if (!std::isfinite(scale)) throw InvalidInput("softmax_scaled: scale must be finite");
  double peak = scale * scores[0];
  for (double s : scores) peak = std::max(peak, scale * s);
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out[k] = std::exp(scale * scores[k] - peak);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

Vector softmax_scaled(const Vector& scores, double scale) {
  return Vector(softmax_scaled(scores.values(), scale));
}

namespace {

template <typename Point>
void central_differences(const std::function<double(const Point&)>& f, std::span<const double> x, double h,
                         std::span<double> out, const std::function<Point(std::vector<double>)>& make) {
  if (!(h > 0.0)) throw InvalidInput("finite_diff_grad: h must be > 0");
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double saved = probe[k];
    probe[k] = saved + h;
    const double up = f(make(probe));
    probe[k] = saved - h;
    const double down = f(make(probe));
    probe[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleFailure("finite_diff_grad: non-finite function value at coordinate " + std::to_string(k));
    }
    out[k] = (up - down) / (2.0 * h);
  }
}

}  // namespace

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  std::vector<double> out(x.dim());
  central_differences<Vector>(f, x.values(), h, out, [](std::vector<double> v) { return Vector(std::move(v)); });
  return Vector(std::move(out));
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double h) {
  Matrix out(x.rows(), x.cols());
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  central_differences<Matrix>(f, x.values(), h, out.values(), [rows, cols](std::vector<double> v) {
    return Matrix(rows, cols, std::move(v));
  });
  return out;
}

double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw InvalidInput("gradient_relative_error: size mismatch");
  double diff = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double d = analytic[k] - numeric[k];
    diff += d * d;
  }
  const double scale = std::max({l2_norm(analytic), l2_norm(numeric), floor});
  return std::sqrt(diff) / scale;
}

}  // namespace deocc
