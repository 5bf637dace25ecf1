#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Data-parallel inner loops used by the tensor ops. Each kernel has a scalar
// reference implementation and an AVX2 variant; the two are bit-identical
// because both accumulate in the same order and use fused multiply-add at the
// same sites. The active backend is chosen at startup from CPU features and
// can be overridden with SWINVID_KERNEL=scalar|avx2 or select().

namespace swinvid::kernels {

// c[m x n] += a[m x k] * b[k x n], all row-major contiguous
using gemm_acc_fn = void (*)(double* c, const double* a, const double* b,
                             size_t m, size_t k, size_t n);
// y[i] += alpha * x[i]
using axpy_fn = void (*)(double* y, double alpha, const double* x, size_t n);
// out[i] = a[i] + b[i] / out[i] = a[i] * b[i]
using binop_fn = void (*)(double* out, const double* a, const double* b, size_t n);
// out[i] = x[i] * s
using scale_fn = void (*)(double* out, const double* x, double s, size_t n);
// AdamW update for one parameter slab; inv_bc{1,2} are the precomputed
// 1/(1-beta^t) bias corrections, lr_wd = lr * weight_decay
using adamw_fn = void (*)(double* p, double* m, double* v, const double* g,
                          size_t n, double lr, double beta1, double beta2,
                          double eps, double inv_bc1, double inv_bc2, double lr_wd);

struct Backend {
    const char* name;
    gemm_acc_fn gemm_acc;
    axpy_fn axpy;
    binop_fn add;
    binop_fn mul;
    scale_fn scale;
    adamw_fn adamw;
};

const Backend& scalar_backend();
#if defined(__x86_64__)
const Backend& avx2_backend();
#endif

bool avx2_supported();
const Backend& active();
// name: "scalar", "avx2", or "auto"; throws contract_error on unknown names
void select(const std::string& name);

// ---- multiply-add accounting ------------------------------------------------
//
// Attention kernels report exact multiply-add counts. Counting is off unless a
// MacScope is alive on the current thread; the dispatch wrappers below and the
// bespoke sampling kernels bump the active slot as they run.

void count_macs(unsigned long long n);

class MacScope {
  public:
    // slot may be null, in which case the scope counts nothing
    explicit MacScope(unsigned long long* slot);
    ~MacScope();
    MacScope(const MacScope&) = delete;
    MacScope& operator=(const MacScope&) = delete;

  private:
    unsigned long long* prev_;
};

// ---- counted dispatch wrappers ----------------------------------------------

void gemm_acc(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
void axpy(double* y, double alpha, const double* x, size_t n);
void add(double* out, const double* a, const double* b, size_t n);
void mul(double* out, const double* a, const double* b, size_t n);
void scale(double* out, const double* x, double s, size_t n);
void adamw(double* p, double* m, double* v, const double* g, size_t n,
           double lr, double beta1, double beta2, double eps,
           double inv_bc1, double inv_bc2, double lr_wd);

}  // namespace swinvid::kernels
