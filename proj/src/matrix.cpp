#include "pmlgan/matrix.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "pmlgan/kernels.hpp"

namespace pmlgan {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw std::invalid_argument("matrix initializer rows have ragged widths");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double v) {
  for (double& x : data_) {
    x = v;
  }
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a,
                              const Matrix& b) {
  throw std::invalid_argument(
      std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) +
      "x" + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
      "x" + std::to_string(b.cols()));
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    shape_error("matmul", a, b);
  }
  Matrix c(a.rows(), b.cols());
  kernels::active().matmul_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                              b.cols());
  return c;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    shape_error("matmul_transpose_a", a, b);
  }
  Matrix c(a.cols(), b.cols());
  kernels::active().matmul_tn(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                              b.cols());
  return c;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    shape_error("matmul_transpose_b", a, b);
  }
  Matrix c(a.rows(), b.rows());
  kernels::active().matmul_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                              b.rows());
  return c;
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= src.rows()) {
      throw std::out_of_range("gather_rows: row index out of range");
    }
    std::memcpy(out.data() + i * src.cols(), src.data() + indices[i] * src.cols(),
                src.cols() * sizeof(double));
  }
  return out;
}

}  // namespace pmlgan
