// Scalar reference backend. The loops here define the numerical contract:
// the SIMD backends must reproduce these results bit for bit, so evaluation
// order (loop nesting, accumulator splitting, mul-then-add) is part of the
// interface and must not be "simplified".

#include "pmlgan/kernels.hpp"

#include <cmath>
#include <cstring>

namespace pmlgan::kernels {
namespace {

void matmul_nn_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double ap = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] = crow[j] + ap * brow[j];
      }
    }
  }
}

// Dot-product reduction shared by matmul_nt and sq_dist: four strided
// accumulators combined as (l0+l1)+(l2+l3), then a scalar tail. The AVX2
// backend maps the four accumulators onto vector lanes.
double dot_4acc(const double* a, const double* b, std::size_t k) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    acc0 = acc0 + a[p] * b[p];
    acc1 = acc1 + a[p + 1] * b[p + 1];
    acc2 = acc2 + a[p + 2] * b[p + 2];
    acc3 = acc3 + a[p + 3] * b[p + 3];
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (; p < k; ++p) {
    s = s + a[p] * b[p];
  }
  return s;
}

void matmul_nt_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_4acc(a + i * k, b + j * k, k);
    }
  }
}

void matmul_tn_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, k * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double ap = a[i * k + p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] = crow[j] + ap * brow[j];
      }
    }
  }
}

void add_row_vector_scalar(double* mat, const double* v, std::size_t rows,
                           std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = mat + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = row[j] + v[j];
    }
  }
}

void sub_row_vector_scalar(const double* x, const double* v, double* out,
                           std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      orow[j] = row[j] - v[j];
    }
  }
}

void mul_row_vector_scalar(const double* x, const double* v, double* out,
                           std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      orow[j] = row[j] * v[j];
    }
  }
}

void colwise_affine_scalar(const double* x, const double* scale,
                           const double* shift, double* out, std::size_t rows,
                           std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      orow[j] = row[j] * scale[j] + shift[j];
    }
  }
}

void col_sums_scalar(const double* x, double* out, std::size_t rows,
                     std::size_t cols) {
  std::memset(out, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      out[j] = out[j] + row[j];
    }
  }
}

void col_dot_sums_scalar(const double* a, const double* b, double* out,
                         std::size_t rows, std::size_t cols) {
  std::memset(out, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * cols;
    const double* brow = b + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      out[j] = out[j] + arow[j] * brow[j];
    }
  }
}

void acc_add_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = dst[i] + src[i];
  }
}

void leaky_relu_scalar(const double* x, double* out, std::size_t n,
                       double slope) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  }
}

void leaky_relu_grad_scalar(const double* x, const double* g, double* out,
                            std::size_t n, double slope) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? g[i] * slope : 0.0);
  }
}

void sub_relu_scalar(const double* y, const double* d, double* z,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = y[i] - d[i];
    z[i] = t > 0.0 ? t : 0.0;
  }
}

void sub_relu_grad_scalar(const double* y, const double* d, const double* g,
                          double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (y[i] - d[i]) > 0.0 ? -g[i] : 0.0;
  }
}

void sigmoid_grad_from_out_scalar(const double* s, const double* g,
                                  double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 1.0 - s[i];
    const double w = s[i] * u;
    out[i] = g[i] * w;
  }
}

void tanh_grad_from_out_scalar(const double* t, const double* g, double* out,
                               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = t[i] * t[i];
    const double w = 1.0 - u;
    out[i] = g[i] * w;
  }
}

void bn_input_grad_scalar(const double* dxhat, const double* xhat,
                          const double* sum_d, const double* sum_dx,
                          const double* inv_std, double inv_rows, double* out,
                          std::size_t rows, std::size_t cols) {
  const double cnt = static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* drow = dxhat + i * cols;
    const double* xrow = xhat + i * cols;
    double* orow = out + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      const double t1 = drow[j] * cnt;
      const double t2 = t1 - sum_d[j];
      const double t3 = xrow[j] * sum_dx[j];
      const double t4 = t2 - t3;
      const double t5 = t4 * inv_std[j];
      orow[j] = t5 * inv_rows;
    }
  }
}

void adam_update_scalar(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double b1, double b2,
                        double eps, double c1, double c2) {
  const double omb1 = 1.0 - b1;
  const double omb2 = 1.0 - b2;
  for (std::size_t i = 0; i < n; ++i) {
    const double ge = g[i];
    const double m1 = b1 * m[i];
    const double m2 = omb1 * ge;
    m[i] = m1 + m2;
    const double gsq = ge * ge;
    const double v1 = b2 * v[i];
    const double v2 = omb2 * gsq;
    v[i] = v1 + v2;
    const double mh = m[i] * c1;
    const double vh = v[i] * c2;
    const double den = std::sqrt(vh) + eps;
    const double q = mh / den;
    const double step = lr * q;
    p[i] = p[i] - step;
  }
}

double sq_dist_scalar(const double* a, const double* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = a[i] - b[i];
    const double d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2];
    const double d3 = a[i + 3] - b[i + 3];
    acc0 = acc0 + d0 * d0;
    acc1 = acc1 + d1 * d1;
    acc2 = acc2 + d2 * d2;
    acc3 = acc3 + d3 * d3;
  }
  double s = (acc0 + acc1) + (acc2 + acc3);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s = s + d * d;
  }
  return s;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      matmul_nn_scalar,
      matmul_nt_scalar,
      matmul_tn_scalar,
      add_row_vector_scalar,
      sub_row_vector_scalar,
      mul_row_vector_scalar,
      colwise_affine_scalar,
      col_sums_scalar,
      col_dot_sums_scalar,
      acc_add_scalar,
      leaky_relu_scalar,
      leaky_relu_grad_scalar,
      sub_relu_scalar,
      sub_relu_grad_scalar,
      sigmoid_grad_from_out_scalar,
      tanh_grad_from_out_scalar,
      bn_input_grad_scalar,
      adam_update_scalar,
      sq_dist_scalar,
  };
  return ops;
}

}  // namespace pmlgan::kernels
