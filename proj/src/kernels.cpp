#include "swinvid/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "swinvid/errors.hpp"

namespace swinvid::kernels {

namespace {

thread_local unsigned long long* t_mac_slot = nullptr;

const Backend* pick_auto() {
#if defined(__x86_64__)
    if (avx2_supported()) return &avx2_backend();
#endif
    return &scalar_backend();
}

std::atomic<const Backend*>& active_slot() {
    static std::atomic<const Backend*> slot{nullptr};
    return slot;
}

const Backend* init_from_env() {
    if (const char* env = std::getenv("SWINVID_KERNEL")) {
        std::string name(env);
        if (name == "scalar") return &scalar_backend();
        if (name == "avx2") {
#if defined(__x86_64__)
            if (avx2_supported()) return &avx2_backend();
#endif
            throw contract_error("avx2 kernels not supported on this machine");
        }
        if (name != "auto") throw contract_error("unknown SWINVID_KERNEL backend: " + name);
    }
    return pick_auto();
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Backend& active() {
    const Backend* b = active_slot().load(std::memory_order_acquire);
    if (!b) {
        b = init_from_env();
        active_slot().store(b, std::memory_order_release);
    }
    return *b;
}

void select(const std::string& name) {
    if (name == "scalar") {
        active_slot().store(&scalar_backend(), std::memory_order_release);
        return;
    }
    if (name == "avx2") {
#if defined(__x86_64__)
        if (avx2_supported()) {
            active_slot().store(&avx2_backend(), std::memory_order_release);
            return;
        }
#endif
        throw contract_error("avx2 kernels not supported on this machine");
    }
    if (name == "auto") {
        active_slot().store(pick_auto(), std::memory_order_release);
        return;
    }
    throw contract_error("unknown kernel backend: " + name);
}

void count_macs(unsigned long long n) {
    if (t_mac_slot) *t_mac_slot += n;
}

MacScope::MacScope(unsigned long long* slot) : prev_(t_mac_slot) {
    t_mac_slot = slot;
}

MacScope::~MacScope() { t_mac_slot = prev_; }

void gemm_acc(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    count_macs(static_cast<unsigned long long>(m) * k * n);
    active().gemm_acc(c, a, b, m, k, n);
}

void axpy(double* y, double alpha, const double* x, size_t n) {
    count_macs(n);
    active().axpy(y, alpha, x, n);
}

void add(double* out, const double* a, const double* b, size_t n) {
    active().add(out, a, b, n);
}

void mul(double* out, const double* a, const double* b, size_t n) {
    count_macs(n);
    active().mul(out, a, b, n);
}

void scale(double* out, const double* x, double s, size_t n) {
    count_macs(n);
    active().scale(out, x, s, n);
}

void adamw(double* p, double* m, double* v, const double* g, size_t n,
           double lr, double beta1, double beta2, double eps,
           double inv_bc1, double inv_bc2, double lr_wd) {
    active().adamw(p, m, v, g, n, lr, beta1, beta2, eps, inv_bc1, inv_bc2, lr_wd);
}

}  // namespace swinvid::kernels
