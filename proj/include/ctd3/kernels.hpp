#pragma once

// Dense-math kernels used by the network engine: GEMM variants, matrix-vector
// products, elementwise activations, Adam and Polyak parameter updates.
//
// Every kernel has a scalar reference implementation and (on x86-64) an AVX2
// variant. The backend is selected once at startup from CPUID and can be
// overridden with set_backend() (used by the equivalence tests). All matrices
// are row-major, 64-bit floats.

#include <cstddef>

namespace ctd3::kernels {

enum class Backend { scalar, avx2 };

// True if this CPU can run the AVX2 variants (AVX2 + FMA).
bool cpu_supports_avx2();

Backend active_backend();
void set_backend(Backend b);

// ---------------------------------------------------------------------------
// GEMM: C is m x n. `accumulate` adds into C instead of overwriting it.
// ---------------------------------------------------------------------------

// C = A (m x k) * B (k x n)
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C = A (m x k) * B^T, with B stored n x k
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C = A^T * B, with A stored k x m and B stored k x n
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// ---------------------------------------------------------------------------
// Matrix-vector: W is out x in, row-major.
// ---------------------------------------------------------------------------

// y = W * x
void matvec(const double* w, const double* x, double* y,
            std::size_t out, std::size_t in);

// y = W^T * g
void matvec_t(const double* w, const double* g, double* y,
              std::size_t out, std::size_t in);

// ---------------------------------------------------------------------------
// Elementwise and reductions.
// ---------------------------------------------------------------------------

// Each of `rows` rows of y (length `cols`) += b.
void add_bias_rows(double* y, const double* b, std::size_t rows, std::size_t cols);

// out[j] = sum over rows of a[i][j]; a is rows x cols.
void col_sums(const double* a, double* out, std::size_t rows, std::size_t cols);

// y = alpha * x + beta * y  (Polyak update with alpha = tau, beta = 1 - tau)
void axpby(double alpha, const double* x, double beta, double* y, std::size_t n);

void relu_forward(double* a, std::size_t n);
// g *= 1[a > 0], where a holds the post-activation values
void relu_backward(const double* a, double* g, std::size_t n);

// tanh/sigmoid forward call libm per element in both backends; only their
// derivative passes (pure arithmetic on stored activations) are vectorized.
void tanh_forward(double* a, std::size_t n);
void tanh_backward(const double* a, double* g, std::size_t n);   // g *= 1 - a^2
void sigmoid_forward(double* a, std::size_t n);
void sigmoid_backward(const double* a, double* g, std::size_t n); // g *= a(1-a)

// One bias-corrected Adam step on a flat parameter block.
// b1_pow_t / b2_pow_t are beta1^t / beta2^t for the already-incremented step t.
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double b1_pow_t, double b2_pow_t);

// mean((pred - target)^2)
double mse(const double* pred, const double* target, std::size_t n);

} // namespace ctd3::kernels
