#include "swinvid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "swinvid/errors.hpp"
#include "swinvid/kernels.hpp"

namespace swinvid {

namespace {

// tanh form of GELU
const double kGeluCoef = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

bool should_record(bool any_grad) { return any_grad && Tape::active() != nullptr; }

void record(std::vector<std::shared_ptr<ArrayStorage>> inputs, const Array& out,
            std::function<void()> backward) {
    Tape::active()->record({std::move(inputs), out.storage(), std::move(backward)});
}

void check_same_shape(const char* op, const Array& a, const Array& b) {
    if (a.shape() != b.shape()) {
        throw contract_error(std::string(op) + ": shapes " + a.shape_str() + " and " +
                             b.shape_str() + " differ");
    }
}

void transpose2d(double* dst, const double* src, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
    }
}

size_t leading_numel(const std::vector<size_t>& shape, size_t upto) {
    size_t n = 1;
    for (size_t i = 0; i < upto; ++i) n *= shape[i];
    return n;
}

}  // namespace

Array add(const Array& a, const Array& b) {
    check_same_shape("add", a, b);
    const bool any = a.requires_grad() || b.requires_grad();
    Array out = Array::zeros(a.shape(), any);
    kernels::add(out.data(), a.data(), b.data(), a.numel());
    if (should_record(any)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        const bool na = a.requires_grad(), nb = b.requires_grad();
        record({sa, sb}, out, [sa, sb, so, na, nb] {
            const size_t n = so->data.size();
            if (na) kernels::axpy(sa->grad.data(), 1.0, so->grad.data(), n);
            if (nb) kernels::axpy(sb->grad.data(), 1.0, so->grad.data(), n);
        });
    }
    return out;
}

Array add_bias(const Array& x, const Array& b) {
    const size_t c = x.shape().back();
    if (b.rank() != 1 || b.numel() != c) {
        throw contract_error("add_bias: bias " + b.shape_str() + " does not match last dim of " +
                             x.shape_str());
    }
    const bool any = x.requires_grad() || b.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    const size_t rows = x.numel() / c;
    const double* xp = x.data();
    const double* bp = b.data();
    double* op = out.data();
    for (size_t r = 0; r < rows; ++r) {
        kernels::add(op + r * c, xp + r * c, bp, c);
    }
    if (should_record(any)) {
        auto sx = x.storage(), sb = b.storage(), so = out.storage();
        const bool nx = x.requires_grad(), nb = b.requires_grad();
        record({sx, sb}, out, [sx, sb, so, nx, nb, rows, c] {
            const double* go = so->grad.data();
            if (nx) kernels::axpy(sx->grad.data(), 1.0, go, rows * c);
            if (nb) {
                double* gb = sb->grad.data();
                for (size_t r = 0; r < rows; ++r) {
                    for (size_t j = 0; j < c; ++j) gb[j] += go[r * c + j];
                }
            }
        });
    }
    return out;
}

Array mul(const Array& a, const Array& b) {
    check_same_shape("mul", a, b);
    const bool any = a.requires_grad() || b.requires_grad();
    Array out = Array::zeros(a.shape(), any);
    kernels::mul(out.data(), a.data(), b.data(), a.numel());
    if (should_record(any)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        const bool na = a.requires_grad(), nb = b.requires_grad();
        record({sa, sb}, out, [sa, sb, so, na, nb] {
            const size_t n = so->data.size();
            const double* go = so->grad.data();
            if (na) {
                double* ga = sa->grad.data();
                const double* bv = sb->data.data();
                for (size_t i = 0; i < n; ++i) ga[i] = std::fma(go[i], bv[i], ga[i]);
            }
            if (nb) {
                double* gb = sb->grad.data();
                const double* av = sa->data.data();
                for (size_t i = 0; i < n; ++i) gb[i] = std::fma(go[i], av[i], gb[i]);
            }
        });
    }
    return out;
}

Array mul_last(const Array& x, const Array& s) {
    if (x.rank() < 2) throw contract_error("mul_last: x must have rank >= 2");
    std::vector<size_t> lead(x.shape().begin(), x.shape().end() - 1);
    if (s.shape() != lead) {
        throw contract_error("mul_last: scale " + s.shape_str() + " does not match leading dims of " +
                             x.shape_str());
    }
    const size_t c = x.shape().back();
    const size_t rows = s.numel();
    const bool any = x.requires_grad() || s.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    const double* xp = x.data();
    const double* sp = s.data();
    double* op = out.data();
    for (size_t r = 0; r < rows; ++r) {
        kernels::scale(op + r * c, xp + r * c, sp[r], c);
    }
    if (should_record(any)) {
        auto sx = x.storage(), ss = s.storage(), so = out.storage();
        const bool nx = x.requires_grad(), ns = s.requires_grad();
        record({sx, ss}, out, [sx, ss, so, nx, ns, rows, c] {
            const double* go = so->grad.data();
            if (nx) {
                double* gx = sx->grad.data();
                const double* sv = ss->data.data();
                for (size_t r = 0; r < rows; ++r) {
                    for (size_t j = 0; j < c; ++j) {
                        gx[r * c + j] = std::fma(go[r * c + j], sv[r], gx[r * c + j]);
                    }
                }
            }
            if (ns) {
                double* gs = ss->grad.data();
                const double* xv = sx->data.data();
                for (size_t r = 0; r < rows; ++r) {
                    double acc = gs[r];
                    for (size_t j = 0; j < c; ++j) {
                        acc = std::fma(go[r * c + j], xv[r * c + j], acc);
                    }
                    gs[r] = acc;
                }
            }
        });
    }
    return out;
}

Array scale(const Array& x, double c) {
    const bool any = x.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    kernels::scale(out.data(), x.data(), c, x.numel());
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so, c] {
            kernels::axpy(sx->grad.data(), c, so->grad.data(), so->data.size());
        });
    }
    return out;
}

Array gelu(const Array& x) {
    const bool any = x.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    const double* xp = x.data();
    double* op = out.data();
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) {
        const double v = xp[i];
        const double u = kSqrt2OverPi * (v + kGeluCoef * v * v * v);
        op[i] = 0.5 * v * (1.0 + std::tanh(u));
    }
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so] {
            const double* xv = sx->data.data();
            const double* go = so->grad.data();
            double* gx = sx->grad.data();
            for (size_t i = 0; i < sx->data.size(); ++i) {
                const double v = xv[i];
                const double u = kSqrt2OverPi * (v + kGeluCoef * v * v * v);
                const double t = std::tanh(u);
                const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoef * v * v);
                const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                gx[i] = std::fma(go[i], d, gx[i]);
            }
        });
    }
    return out;
}

Array matmul(const Array& a, const Array& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw contract_error("matmul: operands must have rank >= 2, got " + a.shape_str() +
                             " and " + b.shape_str());
    }
    const size_t m = a.shape()[a.rank() - 2];
    const size_t k = a.shape()[a.rank() - 1];
    const size_t k2 = b.shape()[b.rank() - 2];
    const size_t n = b.shape()[b.rank() - 1];
    if (k != k2) {
        throw contract_error("matmul: inner dimensions of " + a.shape_str() + " and " +
                             b.shape_str() + " differ");
    }
    const size_t batch_a = leading_numel(a.shape(), a.rank() - 2);
    const size_t batch_b = leading_numel(b.shape(), b.rank() - 2);
    const bool bcast_a = a.rank() == 2 && b.rank() > 2;
    const bool bcast_b = b.rank() == 2 && a.rank() > 2;
    size_t batch;
    std::vector<size_t> out_shape;
    if (bcast_a) {
        batch = batch_b;
        out_shape.assign(b.shape().begin(), b.shape().end() - 2);
    } else if (bcast_b || b.rank() == 2) {
        batch = batch_a;
        out_shape.assign(a.shape().begin(), a.shape().end() - 2);
    } else {
        std::vector<size_t> la(a.shape().begin(), a.shape().end() - 2);
        std::vector<size_t> lb(b.shape().begin(), b.shape().end() - 2);
        if (la != lb) {
            throw contract_error("matmul: batch dimensions of " + a.shape_str() + " and " +
                                 b.shape_str() + " differ");
        }
        batch = batch_a;
        out_shape = std::move(la);
    }
    out_shape.push_back(m);
    out_shape.push_back(n);

    const bool any = a.requires_grad() || b.requires_grad();
    Array out = Array::zeros(out_shape, any);
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    for (size_t bi = 0; bi < batch; ++bi) {
        kernels::gemm_acc(op + bi * m * n, ap + (bcast_a ? 0 : bi * m * k),
                          bp + (b.rank() == 2 ? 0 : bi * k * n), m, k, n);
    }
    if (should_record(any)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        const bool na = a.requires_grad(), nb = b.requires_grad();
        const bool one_b = b.rank() == 2;
        const bool one_a = bcast_a;
        record({sa, sb}, out, [sa, sb, so, na, nb, one_a, one_b, batch, m, k, n] {
            const double* go = so->grad.data();
            if (na) {
                std::vector<double> bt(k * n);
                for (size_t bi = 0; bi < batch; ++bi) {
                    const double* bsrc = sb->data.data() + (one_b ? 0 : bi * k * n);
                    if (bi == 0 || !one_b) transpose2d(bt.data(), bsrc, k, n);
                    kernels::gemm_acc(sa->grad.data() + (one_a ? 0 : bi * m * k),
                                      go + bi * m * n, bt.data(), m, n, k);
                }
            }
            if (nb) {
                std::vector<double> at(m * k);
                for (size_t bi = 0; bi < batch; ++bi) {
                    const double* asrc = sa->data.data() + (one_a ? 0 : bi * m * k);
                    if (bi == 0 || !one_a) transpose2d(at.data(), asrc, m, k);
                    kernels::gemm_acc(sb->grad.data() + (one_b ? 0 : bi * k * n),
                                      at.data(), go + bi * m * n, k, m, n);
                }
            }
        });
    }
    return out;
}

Array softmax(const Array& x, size_t axis) {
    if (axis >= x.rank()) throw contract_error("softmax: axis out of range for " + x.shape_str());
    const size_t len = x.shape()[axis];
    const size_t outer = leading_numel(x.shape(), axis);
    size_t inner = 1;
    for (size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];

    const bool any = x.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    const double* xp = x.data();
    double* op = out.data();
    for (size_t o = 0; o < outer; ++o) {
        for (size_t i = 0; i < inner; ++i) {
            const size_t base = o * len * inner + i;
            double mx = xp[base];
            for (size_t l = 1; l < len; ++l) mx = std::max(mx, xp[base + l * inner]);
            double sum = 0.0;
            for (size_t l = 0; l < len; ++l) {
                const double e = std::exp(xp[base + l * inner] - mx);
                op[base + l * inner] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (size_t l = 0; l < len; ++l) op[base + l * inner] *= inv;
        }
    }
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so, outer, len, inner] {
            const double* y = so->data.data();
            const double* go = so->grad.data();
            double* gx = sx->grad.data();
            for (size_t o = 0; o < outer; ++o) {
                for (size_t i = 0; i < inner; ++i) {
                    const size_t base = o * len * inner + i;
                    double dot = 0.0;
                    for (size_t l = 0; l < len; ++l) {
                        const size_t at = base + l * inner;
                        dot = std::fma(y[at], go[at], dot);
                    }
                    for (size_t l = 0; l < len; ++l) {
                        const size_t at = base + l * inner;
                        gx[at] = std::fma(y[at], go[at] - dot, gx[at]);
                    }
                }
            }
        });
    }
    return out;
}

Array layer_norm(const Array& x, const Array& gamma, const Array& beta, double eps) {
    const size_t c = x.shape().back();
    if (gamma.rank() != 1 || gamma.numel() != c || beta.rank() != 1 || beta.numel() != c) {
        throw contract_error("layer_norm: scale/shift must be rank-1 of length " +
                             std::to_string(c));
    }
    const size_t rows = x.numel() / c;
    const bool any = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    const double* xp = x.data();
    const double* gp = gamma.data();
    const double* bp = beta.data();
    double* op = out.data();
    for (size_t r = 0; r < rows; ++r) {
        const double* row = xp + r * c;
        double mean = 0.0;
        for (size_t j = 0; j < c; ++j) mean += row[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (size_t j = 0; j < c; ++j) {
            const double d = row[j] - mean;
            var = std::fma(d, d, var);
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (size_t j = 0; j < c; ++j) {
            const double xhat = (row[j] - mean) * inv;
            op[r * c + j] = std::fma(gp[j], xhat, bp[j]);
        }
    }
    if (should_record(any)) {
        auto sx = x.storage(), sg = gamma.storage(), sb = beta.storage(), so = out.storage();
        const bool nx = x.requires_grad(), ng = gamma.requires_grad(), nb = beta.requires_grad();
        record({sx, sg, sb}, out, [sx, sg, sb, so, nx, ng, nb, rows, c, eps] {
            const double* xv = sx->data.data();
            const double* gv = sg->data.data();
            const double* go = so->grad.data();
            std::vector<double> xhat(c);
            for (size_t r = 0; r < rows; ++r) {
                const double* row = xv + r * c;
                const double* grow = go + r * c;
                double mean = 0.0;
                for (size_t j = 0; j < c; ++j) mean += row[j];
                mean /= static_cast<double>(c);
                double var = 0.0;
                for (size_t j = 0; j < c; ++j) {
                    const double d = row[j] - mean;
                    var = std::fma(d, d, var);
                }
                var /= static_cast<double>(c);
                const double inv = 1.0 / std::sqrt(var + eps);
                for (size_t j = 0; j < c; ++j) xhat[j] = (row[j] - mean) * inv;
                if (ng) {
                    double* gg = sg->grad.data();
                    for (size_t j = 0; j < c; ++j) gg[j] = std::fma(grow[j], xhat[j], gg[j]);
                }
                if (nb) {
                    double* gb = sb->grad.data();
                    for (size_t j = 0; j < c; ++j) gb[j] += grow[j];
                }
                if (nx) {
                    double sum_dh = 0.0, sum_dh_xh = 0.0;
                    for (size_t j = 0; j < c; ++j) {
                        const double dh = grow[j] * gv[j];
                        sum_dh += dh;
                        sum_dh_xh = std::fma(dh, xhat[j], sum_dh_xh);
                    }
                    const double n = static_cast<double>(c);
                    double* gx = sx->grad.data();
                    for (size_t j = 0; j < c; ++j) {
                        const double dh = grow[j] * gv[j];
                        gx[r * c + j] +=
                            inv * (dh - sum_dh / n - xhat[j] * sum_dh_xh / n);
                    }
                }
            }
        });
    }
    return out;
}

Array take(const Array& x, IndexMap idx, std::vector<size_t> out_shape) {
    if (!idx) throw contract_error("take: null index map");
    const size_t out_n = Array::shape_numel(out_shape);
    if (idx->size() != out_n) {
        throw contract_error("take: index map has " + std::to_string(idx->size()) +
                             " entries for output " + Array::shape_str(out_shape));
    }
    const bool any = x.requires_grad();
    Array out = Array::zeros(std::move(out_shape), any);
    const double* xp = x.data();
    double* op = out.data();
    const int64_t limit = static_cast<int64_t>(x.numel());
    const int64_t* ip = idx->data();
    for (size_t i = 0; i < out_n; ++i) {
        const int64_t j = ip[i];
        if (j >= limit) throw contract_error("take: index out of range");
        op[i] = j < 0 ? 0.0 : xp[j];
    }
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so, idx] {
            const double* go = so->grad.data();
            double* gx = sx->grad.data();
            const int64_t* ip = idx->data();
            for (size_t i = 0; i < so->data.size(); ++i) {
                if (ip[i] >= 0) gx[ip[i]] += go[i];
            }
        });
    }
    return out;
}

Array reshape(const Array& x, std::vector<size_t> shape) {
    if (Array::shape_numel(shape) != x.numel()) {
        throw contract_error("reshape: cannot view " + x.shape_str() + " as " +
                             Array::shape_str(shape));
    }
    const bool any = x.requires_grad();
    Array out = Array::zeros(std::move(shape), any);
    std::copy(x.data(), x.data() + x.numel(), out.data());
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so] {
            kernels::axpy(sx->grad.data(), 1.0, so->grad.data(), so->data.size());
        });
    }
    return out;
}

Array mean_middle(const Array& x) {
    if (x.rank() != 3) throw contract_error("mean_middle: expected rank 3, got " + x.shape_str());
    const size_t a = x.shape()[0], m = x.shape()[1], c = x.shape()[2];
    const bool any = x.requires_grad();
    Array out = Array::zeros({a, c}, any);
    const double* xp = x.data();
    double* op = out.data();
    const double inv = 1.0 / static_cast<double>(m);
    for (size_t i = 0; i < a; ++i) {
        for (size_t j = 0; j < m; ++j) {
            for (size_t l = 0; l < c; ++l) op[i * c + l] += xp[(i * m + j) * c + l];
        }
        for (size_t l = 0; l < c; ++l) op[i * c + l] *= inv;
    }
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so, a, m, c, inv] {
            const double* go = so->grad.data();
            double* gx = sx->grad.data();
            for (size_t i = 0; i < a; ++i) {
                for (size_t j = 0; j < m; ++j) {
                    for (size_t l = 0; l < c; ++l) {
                        gx[(i * m + j) * c + l] = std::fma(go[i * c + l], inv, gx[(i * m + j) * c + l]);
                    }
                }
            }
        });
    }
    return out;
}

Array sum_all(const Array& x) {
    const bool any = x.requires_grad();
    Array out = Array::zeros({1}, any);
    const double* xp = x.data();
    double acc = 0.0;
    for (size_t i = 0; i < x.numel(); ++i) acc += xp[i];
    out.data()[0] = acc;
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so] {
            const double g = so->grad[0];
            double* gx = sx->grad.data();
            for (size_t i = 0; i < sx->data.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

Array clamp_per_last(const Array& x, std::vector<double> hi) {
    const size_t c = x.shape().back();
    if (hi.size() != c) {
        throw contract_error("clamp_per_last: bounds length " + std::to_string(hi.size()) +
                             " does not match last dim of " + x.shape_str());
    }
    const bool any = x.requires_grad();
    Array out = Array::zeros(x.shape(), any);
    const double* xp = x.data();
    double* op = out.data();
    for (size_t i = 0; i < x.numel(); ++i) {
        op[i] = std::min(std::max(xp[i], 0.0), hi[i % c]);
    }
    if (should_record(any)) {
        auto sx = x.storage(), so = out.storage();
        record({sx}, out, [sx, so, hi = std::move(hi), c] {
            const double* xv = sx->data.data();
            const double* go = so->grad.data();
            double* gx = sx->grad.data();
            for (size_t i = 0; i < sx->data.size(); ++i) {
                const double v = xv[i];
                if (v >= 0.0 && v <= hi[i % c]) gx[i] += go[i];
            }
        });
    }
    return out;
}

Array cross_entropy_mean(const Array& logits, const std::vector<int>& targets) {
    if (logits.rank() != 2) {
        throw contract_error("cross_entropy_mean: expected rank-2 logits, got " +
                             logits.shape_str());
    }
    const size_t b = logits.shape()[0], k = logits.shape()[1];
    if (targets.size() != b) {
        throw contract_error("cross_entropy_mean: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(b) + " rows");
    }
    for (int t : targets) {
        if (t < 0 || static_cast<size_t>(t) >= k) {
            throw contract_error("cross_entropy_mean: target class " + std::to_string(t) +
                                 " out of range");
        }
    }
    const bool any = logits.requires_grad();
    Array out = Array::zeros({1}, any);
    const double* lp = logits.data();
    double loss = 0.0;
    std::vector<double> lse(b);
    for (size_t r = 0; r < b; ++r) {
        const double* row = lp + r * k;
        double mx = row[0];
        for (size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        lse[r] = mx + std::log(sum);
        loss += lse[r] - row[targets[r]];
    }
    out.data()[0] = loss / static_cast<double>(b);
    if (should_record(any)) {
        auto sl = logits.storage(), so = out.storage();
        record({sl}, out, [sl, so, targets, lse = std::move(lse), b, k] {
            const double g = so->grad[0] / static_cast<double>(b);
            const double* lv = sl->data.data();
            double* gl = sl->grad.data();
            for (size_t r = 0; r < b; ++r) {
                for (size_t j = 0; j < k; ++j) {
                    const double p = std::exp(lv[r * k + j] - lse[r]);
                    const double ind = static_cast<size_t>(targets[r]) == j ? 1.0 : 0.0;
                    gl[r * k + j] = std::fma(g, p - ind, gl[r * k + j]);
                }
            }
        });
    }
    return out;
}

Array relpos_bias_add(const Array& scores, const Array& table,
                      std::shared_ptr<const std::vector<int32_t>> idx) {
    if (scores.rank() != 4 || scores.shape()[2] != scores.shape()[3]) {
        throw contract_error("relpos_bias_add: expected scores [groups, heads, v, v], got " +
                             scores.shape_str());
    }
    const size_t g = scores.shape()[0], h = scores.shape()[1], v = scores.shape()[2];
    if (table.rank() != 2 || table.shape()[1] != h) {
        throw contract_error("relpos_bias_add: table " + table.shape_str() +
                             " does not match head count " + std::to_string(h));
    }
    if (!idx || idx->size() != v * v) {
        throw contract_error("relpos_bias_add: index size does not match window volume");
    }
    const size_t rows = table.shape()[0];
    for (int32_t r : *idx) {
        if (r < 0 || static_cast<size_t>(r) >= rows) {
            throw contract_error("relpos_bias_add: table row out of range");
        }
    }
    const bool any = scores.requires_grad() || table.requires_grad();
    Array out = Array::zeros(scores.shape(), any);
    const double* sp = scores.data();
    const double* tp = table.data();
    double* op = out.data();
    for (size_t gi = 0; gi < g; ++gi) {
        for (size_t hi = 0; hi < h; ++hi) {
            double* odst = op + (gi * h + hi) * v * v;
            const double* ssrc = sp + (gi * h + hi) * v * v;
            for (size_t ij = 0; ij < v * v; ++ij) {
                odst[ij] = ssrc[ij] + tp[static_cast<size_t>((*idx)[ij]) * h + hi];
            }
        }
    }
    if (should_record(any)) {
        auto ss = scores.storage(), st = table.storage(), so = out.storage();
        const bool ns = scores.requires_grad(), nt = table.requires_grad();
        record({ss, st}, out, [ss, st, so, idx, ns, nt, g, h, v] {
            const double* go = so->grad.data();
            if (ns) kernels::axpy(ss->grad.data(), 1.0, go, so->data.size());
            if (nt) {
                double* gt = st->grad.data();
                for (size_t gi = 0; gi < g; ++gi) {
                    for (size_t hi = 0; hi < h; ++hi) {
                        const double* gsrc = go + (gi * h + hi) * v * v;
                        for (size_t ij = 0; ij < v * v; ++ij) {
                            gt[static_cast<size_t>((*idx)[ij]) * h + hi] += gsrc[ij];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Array add_window_mask(const Array& scores, std::shared_ptr<const std::vector<double>> mask,
                      size_t num_windows) {
    if (scores.rank() != 4 || scores.shape()[2] != scores.shape()[3]) {
        throw contract_error("add_window_mask: expected scores [groups, heads, v, v], got " +
                             scores.shape_str());
    }
    const size_t g = scores.shape()[0], h = scores.shape()[1], v = scores.shape()[2];
    if (num_windows == 0 || g % num_windows != 0) {
        throw contract_error("add_window_mask: group count " + std::to_string(g) +
                             " is not a multiple of " + std::to_string(num_windows) + " windows");
    }
    if (!mask || mask->size() != num_windows * v * v) {
        throw contract_error("add_window_mask: mask size does not match window volume");
    }
    const bool any = scores.requires_grad();
    Array out = Array::zeros(scores.shape(), any);
    const double* sp = scores.data();
    const double* mp = mask->data();
    double* op = out.data();
    for (size_t gi = 0; gi < g; ++gi) {
        const double* msrc = mp + (gi % num_windows) * v * v;
        for (size_t hi = 0; hi < h; ++hi) {
            double* odst = op + (gi * h + hi) * v * v;
            const double* ssrc = sp + (gi * h + hi) * v * v;
            kernels::add(odst, ssrc, msrc, v * v);
        }
    }
    if (should_record(any)) {
        auto ss = scores.storage(), so = out.storage();
        record({ss}, out, [ss, so] {
            kernels::axpy(ss->grad.data(), 1.0, so->grad.data(), so->data.size());
        });
    }
    return out;
}

Array trilinear_gather(const Array& grid, const Array& coords) {
    if (grid.rank() != 6) {
        throw contract_error("trilinear_gather: expected grid [groups, t, h, w, heads, ch], got " +
                             grid.shape_str());
    }
    if (coords.rank() != 5 || coords.shape().back() != 3) {
        throw contract_error(
            "trilinear_gather: expected coords [groups, queries, heads, points, 3], got " +
            coords.shape_str());
    }
    const size_t g = grid.shape()[0];
    const size_t dims[3] = {grid.shape()[1], grid.shape()[2], grid.shape()[3]};
    const size_t h = grid.shape()[4], ch = grid.shape()[5];
    const size_t q = coords.shape()[1], np = coords.shape()[3];
    if (coords.shape()[0] != g || coords.shape()[2] != h) {
        throw contract_error("trilinear_gather: coords " + coords.shape_str() +
                             " do not match grid " + grid.shape_str());
    }
    const bool any = grid.requires_grad() || coords.requires_grad();
    Array out = Array::zeros({g, q, h, np, ch}, any);
    const double* gp = grid.data();
    const double* cp = coords.data();
    double* op = out.data();

    // strides within one group of the grid
    const size_t s_w = h * ch;
    const size_t s_h = dims[2] * s_w;
    const size_t s_t = dims[1] * s_h;

    auto corner_setup = [&dims](const double* cc, size_t* i0, double* frac) {
        for (int ax = 0; ax < 3; ++ax) {
            if (dims[ax] == 1) {
                i0[ax] = 0;
                frac[ax] = 0.0;
            } else {
                double fl = std::floor(cc[ax]);
                long long ii = static_cast<long long>(fl);
                if (ii < 0) ii = 0;
                if (ii > static_cast<long long>(dims[ax]) - 2) {
                    ii = static_cast<long long>(dims[ax]) - 2;
                }
                i0[ax] = static_cast<size_t>(ii);
                frac[ax] = cc[ax] - static_cast<double>(ii);
            }
        }
    };

    for (size_t gi = 0; gi < g; ++gi) {
        const double* gbase = gp + gi * dims[0] * s_t;
        for (size_t qi = 0; qi < q; ++qi) {
            for (size_t hi = 0; hi < h; ++hi) {
                for (size_t ni = 0; ni < np; ++ni) {
                    const double* cc = cp + (((gi * q + qi) * h + hi) * np + ni) * 3;
                    size_t i0[3];
                    double f[3];
                    corner_setup(cc, i0, f);
                    const double wt[2] = {1.0 - f[0], f[0]};
                    const double wh[2] = {1.0 - f[1], f[1]};
                    const double ww[2] = {1.0 - f[2], f[2]};
                    double* odst = op + ((((gi * q + qi) * h + hi) * np + ni)) * ch;
                    for (int a = 0; a < 2; ++a) {
                        const size_t it = dims[0] == 1 ? 0 : i0[0] + static_cast<size_t>(a);
                        for (int bx = 0; bx < 2; ++bx) {
                            const size_t ih = dims[1] == 1 ? 0 : i0[1] + static_cast<size_t>(bx);
                            for (int cx = 0; cx < 2; ++cx) {
                                const size_t iw = dims[2] == 1 ? 0 : i0[2] + static_cast<size_t>(cx);
                                const double w = wt[a] * wh[bx] * ww[cx];
                                const double* src =
                                    gbase + it * s_t + ih * s_h + iw * s_w + hi * ch;
                                for (size_t l = 0; l < ch; ++l) {
                                    odst[l] = std::fma(w, src[l], odst[l]);
                                }
                            }
                        }
                    }
                    kernels::count_macs(16 + 8 * static_cast<unsigned long long>(ch));
                }
            }
        }
    }
    if (should_record(any)) {
        auto sg = grid.storage(), sc = coords.storage(), so = out.storage();
        const bool ngr = grid.requires_grad(), nco = coords.requires_grad();
        const size_t d0 = dims[0], d1 = dims[1], d2 = dims[2];
        record({sg, sc}, out, [sg, sc, so, ngr, nco, g, q, h, np, ch, d0, d1, d2, s_t, s_h, s_w] {
            const size_t dims[3] = {d0, d1, d2};
            const double dflag[3] = {d0 > 1 ? 1.0 : 0.0, d1 > 1 ? 1.0 : 0.0, d2 > 1 ? 1.0 : 0.0};
            const double* gv = sg->data.data();
            const double* cv = sc->data.data();
            const double* go = so->grad.data();
            double* ggrid = ngr ? sg->grad.data() : nullptr;
            double* gcoords = nco ? sc->grad.data() : nullptr;
            for (size_t gi = 0; gi < g; ++gi) {
                const double* gbase = gv + gi * dims[0] * s_t;
                double* ggbase = ngr ? ggrid + gi * dims[0] * s_t : nullptr;
                for (size_t qi = 0; qi < q; ++qi) {
                    for (size_t hi = 0; hi < h; ++hi) {
                        for (size_t ni = 0; ni < np; ++ni) {
                            const size_t pt = ((gi * q + qi) * h + hi) * np + ni;
                            const double* cc = cv + pt * 3;
                            size_t i0[3];
                            double f[3];
                            for (int ax = 0; ax < 3; ++ax) {
                                if (dims[ax] == 1) {
                                    i0[ax] = 0;
                                    f[ax] = 0.0;
                                } else {
                                    long long ii = static_cast<long long>(std::floor(cc[ax]));
                                    if (ii < 0) ii = 0;
                                    if (ii > static_cast<long long>(dims[ax]) - 2) {
                                        ii = static_cast<long long>(dims[ax]) - 2;
                                    }
                                    i0[ax] = static_cast<size_t>(ii);
                                    f[ax] = cc[ax] - static_cast<double>(ii);
                                }
                            }
                            const double wt[2] = {1.0 - f[0], f[0]};
                            const double wh[2] = {1.0 - f[1], f[1]};
                            const double ww[2] = {1.0 - f[2], f[2]};
                            const double* gdst = go + pt * ch;
                            double acc[3] = {0.0, 0.0, 0.0};
                            for (int a = 0; a < 2; ++a) {
                                const size_t it = dims[0] == 1 ? 0 : i0[0] + static_cast<size_t>(a);
                                for (int bx = 0; bx < 2; ++bx) {
                                    const size_t ih =
                                        dims[1] == 1 ? 0 : i0[1] + static_cast<size_t>(bx);
                                    for (int cx = 0; cx < 2; ++cx) {
                                        const size_t iw =
                                            dims[2] == 1 ? 0 : i0[2] + static_cast<size_t>(cx);
                                        const size_t off =
                                            it * s_t + ih * s_h + iw * s_w + hi * ch;
                                        const double w = wt[a] * wh[bx] * ww[cx];
                                        if (ngr) {
                                            double* dst = ggbase + off;
                                            for (size_t l = 0; l < ch; ++l) {
                                                dst[l] = std::fma(w, gdst[l], dst[l]);
                                            }
                                        }
                                        if (nco) {
                                            const double* src = gbase + off;
                                            double dot = 0.0;
                                            for (size_t l = 0; l < ch; ++l) {
                                                dot = std::fma(src[l], gdst[l], dot);
                                            }
                                            const double st = (a ? 1.0 : -1.0) * dflag[0];
                                            const double sh = (bx ? 1.0 : -1.0) * dflag[1];
                                            const double sw = (cx ? 1.0 : -1.0) * dflag[2];
                                            acc[0] += st * wh[bx] * ww[cx] * dot;
                                            acc[1] += wt[a] * sh * ww[cx] * dot;
                                            acc[2] += wt[a] * wh[bx] * sw * dot;
                                        }
                                    }
                                }
                            }
                            if (nco) {
                                gcoords[pt * 3 + 0] += acc[0];
                                gcoords[pt * 3 + 1] += acc[1];
                                gcoords[pt * 3 + 2] += acc[2];
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Array linear(const Array& x, const Array& w, const Array& b) {
    if (w.rank() != 2) throw contract_error("linear: weight must be rank 2, got " + w.shape_str());
    const size_t cin = x.shape().back();
    if (w.shape()[0] != cin) {
        throw contract_error("linear: input " + x.shape_str() + " does not match weight " +
                             w.shape_str());
    }
    const size_t rows = x.numel() / cin;
    Array flat = reshape(x, {rows, cin});
    Array y = matmul(flat, w);
    if (b.valid()) y = add_bias(y, b);
    std::vector<size_t> out_shape(x.shape().begin(), x.shape().end() - 1);
    out_shape.push_back(w.shape()[1]);
    return reshape(y, out_shape);
}

IndexMap permute_map(const std::vector<size_t>& shape, const std::vector<size_t>& perm,
                     std::vector<size_t>* out_shape) {
    const size_t r = shape.size();
    if (perm.size() != r) throw contract_error("permute_map: rank mismatch");
    std::vector<bool> used(r, false);
    for (size_t p : perm) {
        if (p >= r || used[p]) throw contract_error("permute_map: invalid permutation");
        used[p] = true;
    }
    std::vector<size_t> oshape(r);
    for (size_t i = 0; i < r; ++i) oshape[i] = shape[perm[i]];
    std::vector<size_t> istride(r, 1);
    for (size_t i = r; i-- > 1;) istride[i - 1] = istride[i] * shape[i];
    auto idx = std::make_shared<std::vector<int64_t>>(Array::shape_numel(oshape));
    std::vector<size_t> oc(r, 0);
    for (size_t flat = 0; flat < idx->size(); ++flat) {
        size_t src = 0;
        for (size_t i = 0; i < r; ++i) src += oc[i] * istride[perm[i]];
        (*idx)[flat] = static_cast<int64_t>(src);
        for (size_t i = r; i-- > 0;) {
            if (++oc[i] < oshape[i]) break;
            oc[i] = 0;
        }
    }
    if (out_shape) *out_shape = std::move(oshape);
    return idx;
}

Array transpose_last2(const Array& x) {
    if (x.rank() < 2) throw contract_error("transpose_last2: rank must be >= 2");
    std::vector<size_t> perm(x.rank());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    std::vector<size_t> out_shape;
    IndexMap idx = permute_map(x.shape(), perm, &out_shape);
    return take(x, idx, out_shape);
}

}  // namespace swinvid
