// Scalar reference kernels. These define the semantics the AVX2 variants are
// equivalence-tested against.

#include "kernels_impl.hpp"

#include <cmath>

namespace ctd3::kernels::scalar {

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        if (!accumulate) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        }
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = a[i * k + kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * m;
        const double* brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matvec(const double* w, const double* x, double* y,
            std::size_t out, std::size_t in) {
    for (std::size_t i = 0; i < out; ++i) {
        const double* wrow = w + i * in;
        double acc = 0.0;
        for (std::size_t j = 0; j < in; ++j) acc += wrow[j] * x[j];
        y[i] = acc;
    }
}

void matvec_t(const double* w, const double* g, double* y,
              std::size_t out, std::size_t in) {
    for (std::size_t j = 0; j < in; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < out; ++i) {
        const double gi = g[i];
        const double* wrow = w + i * in;
        for (std::size_t j = 0; j < in; ++j) y[j] += gi * wrow[j];
    }
}

void add_bias_rows(double* y, const double* b, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* yrow = y + i * cols;
        for (std::size_t j = 0; j < cols; ++j) yrow[j] += b[j];
    }
}

void col_sums(const double* a, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* arow = a + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += arow[j];
    }
}

void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i] + beta * y[i];
}

void relu_forward(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward(const double* a, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] <= 0.0) g[i] = 0.0;
    }
}

void tanh_forward(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = std::tanh(a[i]);
}

void tanh_backward(const double* a, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] *= 1.0 - a[i] * a[i];
}

void sigmoid_forward(double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 / (1.0 + std::exp(-a[i]));
}

void sigmoid_backward(const double* a, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] *= a[i] * (1.0 - a[i]);
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double b1_pow_t, double b2_pow_t) {
    const double mc = 1.0 / (1.0 - b1_pow_t);
    const double vc = 1.0 / (1.0 - b2_pow_t);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] * mc;
        const double vhat = v[i] * vc;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

double mse(const double* pred, const double* target, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

} // namespace ctd3::kernels::scalar
