// AVX2 backend. Mirrors the scalar reference exactly: vector lanes take the
// role of the scalar loop's independent elements (or of its four reduction
// accumulators), multiplies and adds stay separate (no FMA), and tails run
// the same scalar expressions. Any change here must keep outputs bit-equal
// to kernels_scalar.cpp; the kernel equivalence tests enforce that.

#include "pmlgan/kernels.hpp"

#if defined(PMLGAN_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace pmlgan::kernels {
namespace {

void matmul_nn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double ap = a[i * k + p];
      const double* brow = b + p * n;
      const __m256d va = _mm256_set1_pd(ap);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        const __m256d vb = _mm256_loadu_pd(brow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) {
        crow[j] = crow[j] + ap * brow[j];
      }
    }
  }
}

// Vector form of the scalar dot_4acc: lane l holds the scalar accumulator
// acc_l, the lanes combine as (l0+l1)+(l2+l3), then the same scalar tail.
double dot_4acc_avx2(const double* a, const double* b, std::size_t k) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const __m256d va = _mm256_loadu_pd(a + p);
    const __m256d vb = _mm256_loadu_pd(b + p);
    vacc = _mm256_add_pd(vacc, _mm256_mul_pd(va, vb));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, vacc);
  double s = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; p < k; ++p) {
    s = s + a[p] * b[p];
  }
  return s;
}

void matmul_nt_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_4acc_avx2(a + i * k, b + j * k, k);
    }
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, k * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double ap = a[i * k + p];
      double* crow = c + p * n;
      const __m256d va = _mm256_set1_pd(ap);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        const __m256d vb = _mm256_loadu_pd(brow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) {
        crow[j] = crow[j] + ap * brow[j];
      }
    }
  }
}

void add_row_vector_avx2(double* mat, const double* v, std::size_t rows,
                         std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = mat + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d vr = _mm256_loadu_pd(row + j);
      const __m256d vv = _mm256_loadu_pd(v + j);
      _mm256_storeu_pd(row + j, _mm256_add_pd(vr, vv));
    }
    for (; j < cols; ++j) {
      row[j] = row[j] + v[j];
    }
  }
}

void sub_row_vector_avx2(const double* x, const double* v, double* out,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d vr = _mm256_loadu_pd(row + j);
      const __m256d vv = _mm256_loadu_pd(v + j);
      _mm256_storeu_pd(orow + j, _mm256_sub_pd(vr, vv));
    }
    for (; j < cols; ++j) {
      orow[j] = row[j] - v[j];
    }
  }
}

void mul_row_vector_avx2(const double* x, const double* v, double* out,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d vr = _mm256_loadu_pd(row + j);
      const __m256d vv = _mm256_loadu_pd(v + j);
      _mm256_storeu_pd(orow + j, _mm256_mul_pd(vr, vv));
    }
    for (; j < cols; ++j) {
      orow[j] = row[j] * v[j];
    }
  }
}

void colwise_affine_avx2(const double* x, const double* scale,
                         const double* shift, double* out, std::size_t rows,
                         std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d vr = _mm256_loadu_pd(row + j);
      const __m256d vs = _mm256_loadu_pd(scale + j);
      const __m256d vh = _mm256_loadu_pd(shift + j);
      _mm256_storeu_pd(orow + j, _mm256_add_pd(_mm256_mul_pd(vr, vs), vh));
    }
    for (; j < cols; ++j) {
      orow[j] = row[j] * scale[j] + shift[j];
    }
  }
}

void col_sums_avx2(const double* x, double* out, std::size_t rows,
                   std::size_t cols) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    __m256d vacc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < rows; ++i) {
      vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i * cols + j));
    }
    _mm256_storeu_pd(out + j, vacc);
  }
  for (; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      acc = acc + x[i * cols + j];
    }
    out[j] = acc;
  }
}

void col_dot_sums_avx2(const double* a, const double* b, double* out,
                       std::size_t rows, std::size_t cols) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    __m256d vacc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < rows; ++i) {
      const __m256d va = _mm256_loadu_pd(a + i * cols + j);
      const __m256d vb = _mm256_loadu_pd(b + i * cols + j);
      vacc = _mm256_add_pd(vacc, _mm256_mul_pd(va, vb));
    }
    _mm256_storeu_pd(out + j, vacc);
  }
  for (; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      acc = acc + a[i * cols + j] * b[i * cols + j];
    }
    out[j] = acc;
  }
}

void acc_add_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vd = _mm256_loadu_pd(dst + i);
    const __m256d vs = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_add_pd(vd, vs));
  }
  for (; i < n; ++i) {
    dst[i] = dst[i] + src[i];
  }
}

void leaky_relu_avx2(const double* x, double* out, std::size_t n,
                     double slope) {
  const __m256d vslope = _mm256_set1_pd(slope);
  const __m256d vzero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d pos = _mm256_cmp_pd(vx, vzero, _CMP_GT_OQ);
    const __m256d neg_branch = _mm256_mul_pd(vslope, vx);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(neg_branch, vx, pos));
  }
  for (; i < n; ++i) {
    out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  }
}

void leaky_relu_grad_avx2(const double* x, const double* g, double* out,
                          std::size_t n, double slope) {
  const __m256d vslope = _mm256_set1_pd(slope);
  const __m256d vzero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d pos = _mm256_cmp_pd(vx, vzero, _CMP_GT_OQ);
    const __m256d neg = _mm256_cmp_pd(vx, vzero, _CMP_LT_OQ);
    const __m256d scaled = _mm256_mul_pd(vg, vslope);
    const __m256d r = _mm256_or_pd(_mm256_and_pd(vg, pos),
                                   _mm256_and_pd(scaled, neg));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) {
    out[i] = x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? g[i] * slope : 0.0);
  }
}

void sub_relu_avx2(const double* y, const double* d, double* z,
                   std::size_t n) {
  const __m256d vzero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vd = _mm256_loadu_pd(d + i);
    const __m256d t = _mm256_sub_pd(vy, vd);
    _mm256_storeu_pd(z + i, _mm256_max_pd(t, vzero));
  }
  for (; i < n; ++i) {
    const double t = y[i] - d[i];
    z[i] = t > 0.0 ? t : 0.0;
  }
}

void sub_relu_grad_avx2(const double* y, const double* d, const double* g,
                        double* out, std::size_t n) {
  const __m256d vzero = _mm256_setzero_pd();
  const __m256d signbit = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vd = _mm256_loadu_pd(d + i);
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d t = _mm256_sub_pd(vy, vd);
    const __m256d mask = _mm256_cmp_pd(t, vzero, _CMP_GT_OQ);
    const __m256d ng = _mm256_xor_pd(vg, signbit);
    _mm256_storeu_pd(out + i, _mm256_and_pd(ng, mask));
  }
  for (; i < n; ++i) {
    out[i] = (y[i] - d[i]) > 0.0 ? -g[i] : 0.0;
  }
}

void sigmoid_grad_from_out_avx2(const double* s, const double* g, double* out,
                                std::size_t n) {
  const __m256d vone = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vs = _mm256_loadu_pd(s + i);
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d u = _mm256_sub_pd(vone, vs);
    const __m256d w = _mm256_mul_pd(vs, u);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vg, w));
  }
  for (; i < n; ++i) {
    const double u = 1.0 - s[i];
    const double w = s[i] * u;
    out[i] = g[i] * w;
  }
}

void tanh_grad_from_out_avx2(const double* t, const double* g, double* out,
                             std::size_t n) {
  const __m256d vone = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vt = _mm256_loadu_pd(t + i);
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d u = _mm256_mul_pd(vt, vt);
    const __m256d w = _mm256_sub_pd(vone, u);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vg, w));
  }
  for (; i < n; ++i) {
    const double u = t[i] * t[i];
    const double w = 1.0 - u;
    out[i] = g[i] * w;
  }
}

void bn_input_grad_avx2(const double* dxhat, const double* xhat,
                        const double* sum_d, const double* sum_dx,
                        const double* inv_std, double inv_rows, double* out,
                        std::size_t rows, std::size_t cols) {
  const double cnt = static_cast<double>(rows);
  const __m256d vcnt = _mm256_set1_pd(cnt);
  const __m256d vinv_rows = _mm256_set1_pd(inv_rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* drow = dxhat + i * cols;
    const double* xrow = xhat + i * cols;
    double* orow = out + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d vd = _mm256_loadu_pd(drow + j);
      const __m256d vx = _mm256_loadu_pd(xrow + j);
      const __m256d vsd = _mm256_loadu_pd(sum_d + j);
      const __m256d vsx = _mm256_loadu_pd(sum_dx + j);
      const __m256d vis = _mm256_loadu_pd(inv_std + j);
      const __m256d t1 = _mm256_mul_pd(vd, vcnt);
      const __m256d t2 = _mm256_sub_pd(t1, vsd);
      const __m256d t3 = _mm256_mul_pd(vx, vsx);
      const __m256d t4 = _mm256_sub_pd(t2, t3);
      const __m256d t5 = _mm256_mul_pd(t4, vis);
      _mm256_storeu_pd(orow + j, _mm256_mul_pd(t5, vinv_rows));
    }
    for (; j < cols; ++j) {
      const double t1 = drow[j] * cnt;
      const double t2 = t1 - sum_d[j];
      const double t3 = xrow[j] * sum_dx[j];
      const double t4 = t2 - t3;
      const double t5 = t4 * inv_std[j];
      orow[j] = t5 * inv_rows;
    }
  }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double c1, double c2) {
  const double omb1 = 1.0 - b1;
  const double omb2 = 1.0 - b2;
  const __m256d vb1 = _mm256_set1_pd(b1);
  const __m256d vb2 = _mm256_set1_pd(b2);
  const __m256d vomb1 = _mm256_set1_pd(omb1);
  const __m256d vomb2 = _mm256_set1_pd(omb2);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vomb1, vg));
    const __m256d gsq = _mm256_mul_pd(vg, vg);
    vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv), _mm256_mul_pd(vomb2, gsq));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mh = _mm256_mul_pd(vm, vc1);
    const __m256d vh = _mm256_mul_pd(vv, vc2);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vh), veps);
    const __m256d q = _mm256_div_pd(mh, den);
    const __m256d step = _mm256_mul_pd(vlr, q);
    const __m256d vp = _mm256_loadu_pd(p + i);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(vp, step));
  }
  for (; i < n; ++i) {
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

double sq_dist_avx2(const double* a, const double* b, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    const __m256d d = _mm256_sub_pd(va, vb);
    vacc = _mm256_add_pd(vacc, _mm256_mul_pd(d, d));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, vacc);
  double s = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s = s + d * d;
  }
  return s;
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops ops = {
      "avx2",
      matmul_nn_avx2,
      matmul_nt_avx2,
      matmul_tn_avx2,
      add_row_vector_avx2,
      sub_row_vector_avx2,
      mul_row_vector_avx2,
      colwise_affine_avx2,
      col_sums_avx2,
      col_dot_sums_avx2,
      acc_add_avx2,
      leaky_relu_avx2,
      leaky_relu_grad_avx2,
      sub_relu_avx2,
      sub_relu_grad_avx2,
      sigmoid_grad_from_out_avx2,
      tanh_grad_from_out_avx2,
      bn_input_grad_avx2,
      adam_update_avx2,
      sq_dist_avx2,
  };
  return &ops;
}

}  // namespace pmlgan::kernels

#endif  // PMLGAN_HAVE_AVX2
