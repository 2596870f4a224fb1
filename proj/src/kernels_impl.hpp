#pragma once

// Internal: per-backend kernel entry points. The public API in
// ctd3/kernels.hpp routes to one of these namespaces through a dispatch
// table chosen at startup.

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#define CTD3_X86_64 1
#else
#define CTD3_X86_64 0
#endif

namespace ctd3::kernels {

#define CTD3_KERNEL_DECLS                                                          \
    void gemm_nn(const double* a, const double* b, double* c,                      \
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate);    \
    void gemm_nt(const double* a, const double* b, double* c,                      \
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate);    \
    void gemm_tn(const double* a, const double* b, double* c,                      \
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate);    \
    void matvec(const double* w, const double* x, double* y,                       \
                std::size_t out, std::size_t in);                                  \
    void matvec_t(const double* w, const double* g, double* y,                     \
                  std::size_t out, std::size_t in);                                \
    void add_bias_rows(double* y, const double* b, std::size_t rows,               \
                       std::size_t cols);                                          \
    void col_sums(const double* a, double* out, std::size_t rows,                  \
                  std::size_t cols);                                               \
    void axpby(double alpha, const double* x, double beta, double* y,              \
               std::size_t n);                                                     \
    void relu_forward(double* a, std::size_t n);                                   \
    void relu_backward(const double* a, double* g, std::size_t n);                 \
    void tanh_forward(double* a, std::size_t n);                                   \
    void tanh_backward(const double* a, double* g, std::size_t n);                 \
    void sigmoid_forward(double* a, std::size_t n);                                \
    void sigmoid_backward(const double* a, double* g, std::size_t n);              \
    void adam_update(double* p, const double* g, double* m, double* v,             \
                     std::size_t n, double lr, double beta1, double beta2,         \
                     double eps, double b1_pow_t, double b2_pow_t);                \
    double mse(const double* pred, const double* target, std::size_t n);

namespace scalar {
CTD3_KERNEL_DECLS
}

#if CTD3_X86_64
namespace avx2 {
CTD3_KERNEL_DECLS
}
#endif

#undef CTD3_KERNEL_DECLS

} // namespace ctd3::kernels
