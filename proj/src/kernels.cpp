// Backend selection. The best supported backend is chosen once at startup;
// tests flip it explicitly to compare implementations.

#include "ctd3/kernels.hpp"

#include "kernels_impl.hpp"

namespace ctd3::kernels {

bool cpu_supports_avx2() {
#if CTD3_X86_64
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {
Backend g_backend = cpu_supports_avx2() ? Backend::avx2 : Backend::scalar;
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !cpu_supports_avx2()) return;
    g_backend = b;
}

#if CTD3_X86_64
#define CTD3_DISPATCH(fn, ...)                                 \
    do {                                                       \
        if (g_backend == Backend::avx2)                        \
            return avx2::fn(__VA_ARGS__);                      \
        return scalar::fn(__VA_ARGS__);                        \
    } while (0)
#else
#define CTD3_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    CTD3_DISPATCH(gemm_nn, a, b, c, m, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    CTD3_DISPATCH(gemm_nt, a, b, c, m, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    CTD3_DISPATCH(gemm_tn, a, b, c, m, k, n, accumulate);
}

void matvec(const double* w, const double* x, double* y,
            std::size_t out, std::size_t in) {
    CTD3_DISPATCH(matvec, w, x, y, out, in);
}

void matvec_t(const double* w, const double* g, double* y,
              std::size_t out, std::size_t in) {
    CTD3_DISPATCH(matvec_t, w, g, y, out, in);
}

void add_bias_rows(double* y, const double* b, std::size_t rows, std::size_t cols) {
    CTD3_DISPATCH(add_bias_rows, y, b, rows, cols);
}

void col_sums(const double* a, double* out, std::size_t rows, std::size_t cols) {
    CTD3_DISPATCH(col_sums, a, out, rows, cols);
}

void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) {
    CTD3_DISPATCH(axpby, alpha, x, beta, y, n);
}

void relu_forward(double* a, std::size_t n) { CTD3_DISPATCH(relu_forward, a, n); }

void relu_backward(const double* a, double* g, std::size_t n) {
    CTD3_DISPATCH(relu_backward, a, g, n);
}

void tanh_forward(double* a, std::size_t n) { CTD3_DISPATCH(tanh_forward, a, n); }

void tanh_backward(const double* a, double* g, std::size_t n) {
    CTD3_DISPATCH(tanh_backward, a, g, n);
}

void sigmoid_forward(double* a, std::size_t n) {
    CTD3_DISPATCH(sigmoid_forward, a, n);
}

void sigmoid_backward(const double* a, double* g, std::size_t n) {
    CTD3_DISPATCH(sigmoid_backward, a, g, n);
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double b1_pow_t, double b2_pow_t) {
    CTD3_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, b1_pow_t,
                  b2_pow_t);
}

double mse(const double* pred, const double* target, std::size_t n) {
    CTD3_DISPATCH(mse, pred, target, n);
}

#undef CTD3_DISPATCH

} // namespace ctd3::kernels
