#include "swinvid/kernels.hpp"

#include <cmath>

// Scalar reference kernels. The AVX2 variants must match these bit for bit:
// gemm/axpy accumulate through std::fma in the same i-k-j order the vector
// code uses, so lane width never changes the rounding sequence of any output
// element.

namespace swinvid::kernels {
namespace {

void gemm_acc_scalar(double* c, const double* a, const double* b,
                     size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            const double ail = arow[l];
            const double* brow = b + l * n;
            for (size_t j = 0; j < n; ++j) {
                crow[j] = std::fma(ail, brow[j], crow[j]);
            }
        }
    }
}

void axpy_scalar(double* y, double alpha, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_scalar(double* out, const double* a, const double* b, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_scalar(double* out, const double* a, const double* b, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(double* out, const double* x, double s, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] * s;
}

void adamw_scalar(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps,
                  double inv_bc1, double inv_bc2, double lr_wd) {
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    for (size_t i = 0; i < n; ++i) {
        m[i] = std::fma(beta1, m[i], c1 * g[i]);
        v[i] = std::fma(beta2, v[i], c2 * (g[i] * g[i]));
        const double mhat = m[i] * inv_bc1;
        const double vhat = v[i] * inv_bc2;
        const double step = lr * (mhat / (std::sqrt(vhat) + eps));
        const double decay = lr_wd * p[i];
        p[i] = p[i] - step - decay;
    }
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend b{"scalar", gemm_acc_scalar, axpy_scalar,
                           add_scalar, mul_scalar, scale_scalar, adamw_scalar};
    return b;
}

}  // namespace swinvid::kernels
