#include "swinvid/kernels.hpp"

#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>

// AVX2/FMA variants. Remainder lanes fall back to std::fma so every element
// sees the identical rounding sequence as the scalar backend.

namespace swinvid::kernels {
namespace {

void gemm_acc_avx2(double* c, const double* a, const double* b,
                   size_t m, size_t k, size_t n) {
    const size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            const double ail = arow[l];
            const __m256d va = _mm256_set1_pd(ail);
            const double* brow = b + l * n;
            size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                __m256d vb = _mm256_loadu_pd(brow + j);
                vc = _mm256_fmadd_pd(va, vb, vc);
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] = std::fma(ail, brow[j], crow[j]);
        }
    }
}

void axpy_avx2(double* y, double alpha, const double* x, size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, vx, vy));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_avx2(double* out, const double* a, const double* b, size_t n) {
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(double* out, const double* a, const double* b, size_t n) {
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(double* out, const double* x, double s, size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vs));
    }
    for (; i < n; ++i) out[i] = x[i] * s;
}

void adamw_avx2(double* p, double* m, double* v, const double* g, size_t n,
                double lr, double beta1, double beta2, double eps,
                double inv_bc1, double inv_bc2, double lr_wd) {
    const double c1s = 1.0 - beta1;
    const double c2s = 1.0 - beta2;
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(c1s);
    const __m256d vc2 = _mm256_set1_pd(c2s);
    const __m256d vibc1 = _mm256_set1_pd(inv_bc1);
    const __m256d vibc2 = _mm256_set1_pd(inv_bc2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vlrwd = _mm256_set1_pd(lr_wd);
    const size_t n4 = n & ~size_t(3);
    size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i), _mm256_mul_pd(vc1, vg));
        __m256d vv = _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i),
                                     _mm256_mul_pd(vc2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_mul_pd(vm, vibc1);
        __m256d vhat = _mm256_mul_pd(vv, vibc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(mhat, denom));
        __m256d vp = _mm256_loadu_pd(p + i);
        __m256d decay = _mm256_mul_pd(vlrwd, vp);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_sub_pd(vp, step), decay));
    }
    for (; i < n; ++i) {
        m[i] = std::fma(beta1, m[i], c1s * g[i]);
        v[i] = std::fma(beta2, v[i], c2s * (g[i] * g[i]));
        const double mhat = m[i] * inv_bc1;
        const double vhat = v[i] * inv_bc2;
        const double step = lr * (mhat / (std::sqrt(vhat) + eps));
        const double decay = lr_wd * p[i];
        p[i] = p[i] - step - decay;
    }
}

}  // namespace

const Backend& avx2_backend() {
    static const Backend b{"avx2", gemm_acc_avx2, axpy_avx2,
                           add_avx2, mul_avx2, scale_avx2, adamw_avx2};
    return b;
}

}  // namespace swinvid::kernels

#endif  // __x86_64__
