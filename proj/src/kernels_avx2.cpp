// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here runs unless cpu_supports_avx2() said yes.
//
// GEMM microkernels use 4x8 (or 2x4-dot) register tiles with scalar edge
// loops for the remainders. Accumulation order inside a tile differs from
// the scalar reference, so results agree to rounding, not bit-for-bit; the
// equivalence tests check a tight relative tolerance.

#include "kernels_impl.hpp"

#if CTD3_X86_64

#include <immintrin.h>

#include <cmath>

namespace ctd3::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// C[i0..i0+4) x [j0..j0+8) += A(:, k) rows times B rows; saxpy-form tile
// shared by gemm_nn and gemm_tn (they differ only in how A is indexed).
template <typename LoadA>
inline void saxpy_tile_4x8(const double* b, double* c, std::size_t k,
                           std::size_t n, std::size_t i0, std::size_t j0,
                           bool accumulate, LoadA load_a) {
    __m256d acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
    if (accumulate) {
        acc00 = _mm256_loadu_pd(c + (i0 + 0) * n + j0);
        acc01 = _mm256_loadu_pd(c + (i0 + 0) * n + j0 + 4);
        acc10 = _mm256_loadu_pd(c + (i0 + 1) * n + j0);
        acc11 = _mm256_loadu_pd(c + (i0 + 1) * n + j0 + 4);
        acc20 = _mm256_loadu_pd(c + (i0 + 2) * n + j0);
        acc21 = _mm256_loadu_pd(c + (i0 + 2) * n + j0 + 4);
        acc30 = _mm256_loadu_pd(c + (i0 + 3) * n + j0);
        acc31 = _mm256_loadu_pd(c + (i0 + 3) * n + j0 + 4);
    } else {
        acc00 = acc01 = acc10 = acc11 = _mm256_setzero_pd();
        acc20 = acc21 = acc30 = acc31 = _mm256_setzero_pd();
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* brow = b + kk * n + j0;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        const __m256d a0 = _mm256_set1_pd(load_a(i0 + 0, kk));
        const __m256d a1 = _mm256_set1_pd(load_a(i0 + 1, kk));
        const __m256d a2 = _mm256_set1_pd(load_a(i0 + 2, kk));
        const __m256d a3 = _mm256_set1_pd(load_a(i0 + 3, kk));
        acc00 = _mm256_fmadd_pd(a0, b0, acc00);
        acc01 = _mm256_fmadd_pd(a0, b1, acc01);
        acc10 = _mm256_fmadd_pd(a1, b0, acc10);
        acc11 = _mm256_fmadd_pd(a1, b1, acc11);
        acc20 = _mm256_fmadd_pd(a2, b0, acc20);
        acc21 = _mm256_fmadd_pd(a2, b1, acc21);
        acc30 = _mm256_fmadd_pd(a3, b0, acc30);
        acc31 = _mm256_fmadd_pd(a3, b1, acc31);
    }
    _mm256_storeu_pd(c + (i0 + 0) * n + j0, acc00);
    _mm256_storeu_pd(c + (i0 + 0) * n + j0 + 4, acc01);
    _mm256_storeu_pd(c + (i0 + 1) * n + j0, acc10);
    _mm256_storeu_pd(c + (i0 + 1) * n + j0 + 4, acc11);
    _mm256_storeu_pd(c + (i0 + 2) * n + j0, acc20);
    _mm256_storeu_pd(c + (i0 + 2) * n + j0 + 4, acc21);
    _mm256_storeu_pd(c + (i0 + 3) * n + j0, acc30);
    _mm256_storeu_pd(c + (i0 + 3) * n + j0 + 4, acc31);
}

// Scalar edges for the saxpy-form GEMMs.
template <typename LoadA>
inline void saxpy_edge(const double* b, double* c, std::size_t k, std::size_t n,
                       std::size_t i_begin, std::size_t i_end,
                       std::size_t j_begin, std::size_t j_end,
                       bool accumulate, LoadA load_a) {
    for (std::size_t i = i_begin; i < i_end; ++i) {
        for (std::size_t j = j_begin; j < j_end; ++j) {
            double acc = accumulate ? c[i * n + j] : 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += load_a(i, kk) * b[kk * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <typename LoadA>
inline void saxpy_gemm(const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate, LoadA load_a) {
    const std::size_t m4 = m - m % 4;
    const std::size_t n8 = n - n % 8;
    for (std::size_t j0 = 0; j0 < n8; j0 += 8) {
        for (std::size_t i0 = 0; i0 < m4; i0 += 4) {
            saxpy_tile_4x8(b, c, k, n, i0, j0, accumulate, load_a);
        }
    }
    saxpy_edge(b, c, k, n, 0, m4, n8, n, accumulate, load_a);
    saxpy_edge(b, c, k, n, m4, m, 0, n, accumulate, load_a);
}

} // namespace

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    saxpy_gemm(b, c, m, k, n, accumulate,
               [a, k](std::size_t i, std::size_t kk) { return a[i * k + kk]; });
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    saxpy_gemm(b, c, m, k, n, accumulate,
               [a, m](std::size_t i, std::size_t kk) { return a[kk * m + i]; });
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const std::size_t m2 = m - m % 2;
    const std::size_t n4 = n - n % 4;
    const std::size_t k4 = k - k % 4;
    for (std::size_t i0 = 0; i0 < m2; i0 += 2) {
        const double* a0 = a + (i0 + 0) * k;
        const double* a1 = a + (i0 + 1) * k;
        for (std::size_t j0 = 0; j0 < n4; j0 += 4) {
            // 2 A rows x 4 B rows of 4-lane partial dot products.
            __m256d p00 = _mm256_setzero_pd(), p01 = _mm256_setzero_pd();
            __m256d p02 = _mm256_setzero_pd(), p03 = _mm256_setzero_pd();
            __m256d p10 = _mm256_setzero_pd(), p11 = _mm256_setzero_pd();
            __m256d p12 = _mm256_setzero_pd(), p13 = _mm256_setzero_pd();
            const double* b0 = b + (j0 + 0) * k;
            const double* b1 = b + (j0 + 1) * k;
            const double* b2 = b + (j0 + 2) * k;
            const double* b3 = b + (j0 + 3) * k;
            for (std::size_t kk = 0; kk < k4; kk += 4) {
                const __m256d va0 = _mm256_loadu_pd(a0 + kk);
                const __m256d va1 = _mm256_loadu_pd(a1 + kk);
                const __m256d vb0 = _mm256_loadu_pd(b0 + kk);
                const __m256d vb1 = _mm256_loadu_pd(b1 + kk);
                const __m256d vb2 = _mm256_loadu_pd(b2 + kk);
                const __m256d vb3 = _mm256_loadu_pd(b3 + kk);
                p00 = _mm256_fmadd_pd(va0, vb0, p00);
                p01 = _mm256_fmadd_pd(va0, vb1, p01);
                p02 = _mm256_fmadd_pd(va0, vb2, p02);
                p03 = _mm256_fmadd_pd(va0, vb3, p03);
                p10 = _mm256_fmadd_pd(va1, vb0, p10);
                p11 = _mm256_fmadd_pd(va1, vb1, p11);
                p12 = _mm256_fmadd_pd(va1, vb2, p12);
                p13 = _mm256_fmadd_pd(va1, vb3, p13);
            }
            double d00 = hsum(p00), d01 = hsum(p01), d02 = hsum(p02), d03 = hsum(p03);
            double d10 = hsum(p10), d11 = hsum(p11), d12 = hsum(p12), d13 = hsum(p13);
            for (std::size_t kk = k4; kk < k; ++kk) {
                d00 += a0[kk] * b0[kk];
                d01 += a0[kk] * b1[kk];
                d02 += a0[kk] * b2[kk];
                d03 += a0[kk] * b3[kk];
                d10 += a1[kk] * b0[kk];
                d11 += a1[kk] * b1[kk];
                d12 += a1[kk] * b2[kk];
                d13 += a1[kk] * b3[kk];
            }
            double* c0 = c + (i0 + 0) * n + j0;
            double* c1 = c + (i0 + 1) * n + j0;
            if (accumulate) {
                c0[0] += d00; c0[1] += d01; c0[2] += d02; c0[3] += d03;
                c1[0] += d10; c1[1] += d11; c1[2] += d12; c1[3] += d13;
            } else {
                c0[0] = d00; c0[1] = d01; c0[2] = d02; c0[3] = d03;
                c1[0] = d10; c1[1] = d11; c1[2] = d12; c1[3] = d13;
            }
        }
    }
    // Edges: rows past m2 for all j, plus columns past n4 for the tiled rows.
    auto dot = [k](const double* x, const double* y) {
        std::size_t kk = 0;
        __m256d p = _mm256_setzero_pd();
        for (; kk + 4 <= k; kk += 4) {
            p = _mm256_fmadd_pd(_mm256_loadu_pd(x + kk), _mm256_loadu_pd(y + kk), p);
        }
        double d = hsum(p);
        for (; kk < k; ++kk) d += x[kk] * y[kk];
        return d;
    };
    for (std::size_t i = 0; i < m2; ++i) {
        for (std::size_t j = n4; j < n; ++j) {
            const double d = dot(a + i * k, b + j * k);
            c[i * n + j] = accumulate ? c[i * n + j] + d : d;
        }
    }
    for (std::size_t i = m2; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = dot(a + i * k, b + j * k);
            c[i * n + j] = accumulate ? c[i * n + j] + d : d;
        }
    }
}

void matvec(const double* w, const double* x, double* y,
            std::size_t out, std::size_t in) {
    const std::size_t out4 = out - out % 4;
    const std::size_t in4 = in - in % 4;
    for (std::size_t i0 = 0; i0 < out4; i0 += 4) {
        __m256d p0 = _mm256_setzero_pd(), p1 = _mm256_setzero_pd();
        __m256d p2 = _mm256_setzero_pd(), p3 = _mm256_setzero_pd();
        const double* w0 = w + (i0 + 0) * in;
        const double* w1 = w + (i0 + 1) * in;
        const double* w2 = w + (i0 + 2) * in;
        const double* w3 = w + (i0 + 3) * in;
        for (std::size_t j = 0; j < in4; j += 4) {
            const __m256d vx = _mm256_loadu_pd(x + j);
            p0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + j), vx, p0);
            p1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + j), vx, p1);
            p2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + j), vx, p2);
            p3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + j), vx, p3);
        }
        double d0 = hsum(p0), d1 = hsum(p1), d2 = hsum(p2), d3 = hsum(p3);
        for (std::size_t j = in4; j < in; ++j) {
            d0 += w0[j] * x[j];
            d1 += w1[j] * x[j];
            d2 += w2[j] * x[j];
            d3 += w3[j] * x[j];
        }
        y[i0 + 0] = d0;
        y[i0 + 1] = d1;
        y[i0 + 2] = d2;
        y[i0 + 3] = d3;
    }
    for (std::size_t i = out4; i < out; ++i) {
        const double* wr = w + i * in;
        __m256d p = _mm256_setzero_pd();
        for (std::size_t j = 0; j < in4; j += 4) {
            p = _mm256_fmadd_pd(_mm256_loadu_pd(wr + j), _mm256_loadu_pd(x + j), p);
        }
        double d = hsum(p);
        for (std::size_t j = in4; j < in; ++j) d += wr[j] * x[j];
        y[i] = d;
    }
}

void matvec_t(const double* w, const double* g, double* y,
              std::size_t out, std::size_t in) {
    for (std::size_t j = 0; j < in; ++j) y[j] = 0.0;
    const std::size_t in4 = in - in % 4;
    for (std::size_t i = 0; i < out; ++i) {
        const __m256d gi = _mm256_set1_pd(g[i]);
        const double* wr = w + i * in;
        std::size_t j = 0;
        for (; j < in4; j += 4) {
            const __m256d vy = _mm256_loadu_pd(y + j);
            _mm256_storeu_pd(y + j, _mm256_fmadd_pd(gi, _mm256_loadu_pd(wr + j), vy));
        }
        for (; j < in; ++j) y[j] += g[i] * wr[j];
    }
}

void add_bias_rows(double* y, const double* b, std::size_t rows, std::size_t cols) {
    const std::size_t c4 = cols - cols % 4;
    for (std::size_t i = 0; i < rows; ++i) {
        double* yr = y + i * cols;
        std::size_t j = 0;
        for (; j < c4; j += 4) {
            _mm256_storeu_pd(yr + j, _mm256_add_pd(_mm256_loadu_pd(yr + j),
                                                   _mm256_loadu_pd(b + j)));
        }
        for (; j < cols; ++j) yr[j] += b[j];
    }
}

void col_sums(const double* a, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    const std::size_t c4 = cols - cols % 4;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* ar = a + i * cols;
        std::size_t j = 0;
        for (; j < c4; j += 4) {
            _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j),
                                                    _mm256_loadu_pd(ar + j)));
        }
        for (; j < cols; ++j) out[j] += ar[j];
    }
}

void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
    }
    for (; i < n; ++i) y[i] = alpha * x[i] + beta * y[i];
}

void relu_forward(double* a, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(a + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
    }
    for (; i < n; ++i) a[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward(const double* a, double* g, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(a + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
    }
    for (; i < n; ++i) {
        if (a[i] <= 0.0) g[i] = 0.0;
    }
}

void tanh_forward(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = std::tanh(a[i]);
}

void tanh_backward(const double* a, double* g, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d d = _mm256_fnmadd_pd(va, va, one); // 1 - a^2
        _mm256_storeu_pd(g + i, _mm256_mul_pd(_mm256_loadu_pd(g + i), d));
    }
    for (; i < n; ++i) g[i] *= 1.0 - a[i] * a[i];
}

void sigmoid_forward(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 / (1.0 + std::exp(-a[i]));
}

void sigmoid_backward(const double* a, double* g, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d d = _mm256_mul_pd(va, _mm256_sub_pd(one, va));
        _mm256_storeu_pd(g + i, _mm256_mul_pd(_mm256_loadu_pd(g + i), d));
    }
    for (; i < n; ++i) g[i] *= a[i] * (1.0 - a[i]);
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double b1_pow_t, double b2_pow_t) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vmc = _mm256_set1_pd(1.0 / (1.0 - b1_pow_t));
    const __m256d vvc = _mm256_set1_pd(1.0 / (1.0 - b2_pow_t));
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i),
                                     _mm256_mul_pd(v1mb1, vg));
        __m256d vv = _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i),
                                     _mm256_mul_pd(v1mb2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vmc);
        const __m256d vhat = _mm256_mul_pd(vv, vvc);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
    }
    const double mc = 1.0 / (1.0 - b1_pow_t);
    const double vc = 1.0 / (1.0 - b2_pow_t);
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] * mc) / (std::sqrt(v[i] * vc) + eps);
    }
}

double mse(const double* pred, const double* target, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pred + i),
                                        _mm256_loadu_pd(target + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(n);
}

} // namespace ctd3::kernels::avx2

#endif // CTD3_X86_64
