#pragma once

// Dispatched compute kernels for the dense inner loops.
//
// Every operation has a scalar reference implementation and, on x86-64, an
// AVX2 variant selected at runtime. The two backends are bit-identical by
// construction: vector lanes follow the same per-element evaluation order as
// the scalar loops, reductions use an explicit 4-accumulator scheme mirrored
// in both backends, and multiplies and adds are kept separate (no FMA; the
// tree builds with -ffp-contract=off so the compiler cannot fuse them
// either). Transcendental maps (exp, tanh, log) stay in plain per-element
// libm code outside this table, so they are trivially backend-independent.

#include <cstddef>

namespace pmlgan::kernels {

enum class Backend { scalar, avx2 };

struct Ops {
  const char* name;

  // c[m x n] = a[m x k] * b[k x n]
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
  // c[m x n] = a[m x k] * b[n x k]^T  (row-by-row dot products)
  void (*matmul_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
  // c[k x n] = a[m x k]^T * b[m x n]
  void (*matmul_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);

  // mat[i,:] += v
  void (*add_row_vector)(double* mat, const double* v,
                         std::size_t rows, std::size_t cols);
  // out[i,:] = x[i,:] - v
  void (*sub_row_vector)(const double* x, const double* v, double* out,
                         std::size_t rows, std::size_t cols);
  // out[i,:] = x[i,:] * v
  void (*mul_row_vector)(const double* x, const double* v, double* out,
                         std::size_t rows, std::size_t cols);
  // out[i,j] = x[i,j] * scale[j] + shift[j]
  void (*colwise_affine)(const double* x, const double* scale,
                         const double* shift, double* out,
                         std::size_t rows, std::size_t cols);

  // out[j] = sum_i x[i,j]        (accumulated in ascending i order)
  void (*col_sums)(const double* x, double* out,
                   std::size_t rows, std::size_t cols);
  // out[j] = sum_i a[i,j]*b[i,j] (accumulated in ascending i order)
  void (*col_dot_sums)(const double* a, const double* b, double* out,
                       std::size_t rows, std::size_t cols);

  // dst += src
  void (*acc_add)(double* dst, const double* src, std::size_t n);

  // out = x > 0 ? x : slope*x
  void (*leaky_relu)(const double* x, double* out, std::size_t n, double slope);
  // out = g * f'(x) with f'(x) = 1 (x>0), slope (x<0), 0 (x==0)
  void (*leaky_relu_grad)(const double* x, const double* g, double* out,
                          std::size_t n, double slope);

  // z = max(y - d, 0)
  void (*sub_relu)(const double* y, const double* d, double* z, std::size_t n);
  // out = (y-d) > 0 ? -g : 0    (gradient w.r.t. d of max(y-d, 0))
  void (*sub_relu_grad)(const double* y, const double* d, const double* g,
                        double* out, std::size_t n);

  // out = g * s*(1-s), s being the cached sigmoid output
  void (*sigmoid_grad_from_out)(const double* s, const double* g, double* out,
                                std::size_t n);
  // out = g * (1-t*t), t being the cached tanh output
  void (*tanh_grad_from_out)(const double* t, const double* g, double* out,
                             std::size_t n);

  // out[i,j] = ((dxhat[i,j]*rows - sum_d[j]) - xhat[i,j]*sum_dx[j])
  //            * inv_std[j] * inv_rows
  void (*bn_input_grad)(const double* dxhat, const double* xhat,
                        const double* sum_d, const double* sum_dx,
                        const double* inv_std, double inv_rows, double* out,
                        std::size_t rows, std::size_t cols);

  // In-place Adam update on one parameter block; c1 and c2 are the
  // bias-correction factors 1/(1-b1^t) and 1/(1-b2^t).
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double c1, double c2);

  // sum_i (a[i]-b[i])^2 via the shared 4-accumulator reduction
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
};

const Ops& scalar_ops();

// Present when the binary was built with the AVX2 translation unit; callers
// must still check cpu_supports_avx2() before routing work through it.
const Ops* avx2_ops();
bool cpu_supports_avx2();

// Active backend. Defaults to the best supported one; the PMLGAN_KERNELS
// environment variable (scalar|avx2|auto) overrides the default, and
// select() overrides both (tests use it to exercise each backend).
const Ops& active();
Backend active_backend();
void select(Backend b);

}  // namespace pmlgan::kernels
