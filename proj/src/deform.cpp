#include "swinvid/deform.hpp"

#include <cmath>

#include "swinvid/errors.hpp"
#include "swinvid/kernels.hpp"
#include "swinvid/ops.hpp"
#include "swinvid/rng.hpp"

namespace swinvid {

void DeformConfig::validate() const {
    if (n_points == 0) throw contract_error("deform config: n_points must be >= 1");
    if (heads == 0) throw contract_error("deform config: heads must be >= 1");
    if (!(offset_scale > 0.0) || !std::isfinite(offset_scale)) {
        throw contract_error("deform config: offset_scale must be a positive finite value");
    }
}

SamplePlan predict_sample_plan(const Array& queries, const DeformParams& p,
                               MacCounters* counters) {
    if (queries.rank() != 3) {
        throw contract_error("predict_sample_plan: expected (groups, tokens, c), got " +
                             queries.shape_str());
    }
    const size_t g = queries.shape()[0], v = queries.shape()[1];
    const size_t h = p.heads, n = p.n_points;

    SamplePlan plan;
    {
        kernels::MacScope mac(counters ? &counters->offsets : nullptr);
        Array raw = linear(queries, p.off_w, p.off_b);  // (G, V, H*N*3)
        plan.offsets = scale(raw, p.offset_scale);
    }
    plan.offsets = reshape(plan.offsets, {g, v, h, n, 3});

    Array logits;
    {
        kernels::MacScope mac(counters ? &counters->score : nullptr);
        logits = linear(queries, p.wgt_w, p.wgt_b);  // (G, V, H*N)
    }
    plan.weights = softmax(reshape(logits, {g, v, h, n}), 3);
    return plan;
}

Array deformable_attention_with_plan(const Array& windows, Dims3 window, const DeformParams& p,
                                     const SamplePlan& plan, MacCounters* counters) {
    if (windows.rank() != 3) {
        throw contract_error("deformable_attention: expected (groups, tokens, c), got " +
                             windows.shape_str());
    }
    const size_t g = windows.shape()[0], v = windows.shape()[1], c = windows.shape()[2];
    if (v != window.volume()) {
        throw contract_error("deformable_attention: " + std::to_string(v) +
                             " tokens per group does not match window volume " +
                             std::to_string(window.volume()));
    }
    if (p.heads == 0 || c % p.heads != 0) {
        throw contract_error("deformable_attention: " + std::to_string(c) +
                             " channels not divisible by " + std::to_string(p.heads) + " heads");
    }
    const size_t heads = p.heads, n = p.n_points, d = c / heads;
    const auto& osh = plan.offsets.shape();
    if (osh.size() != 5 || osh[0] != g || osh[1] != v || osh[2] != heads || osh[3] != n ||
        osh[4] != 3) {
        throw contract_error("deformable_attention: plan offsets " + plan.offsets.shape_str() +
                             " inconsistent with windows " + windows.shape_str());
    }

    // each query's reference point is its own cell in the window lattice
    std::vector<double> ref(g * v * heads * n * 3);
    size_t o = 0;
    for (size_t gi = 0; gi < g; ++gi) {
        for (size_t tok = 0; tok < v; ++tok) {
            const double ct = static_cast<double>(tok / (window.h * window.w));
            const double ch = static_cast<double>((tok / window.w) % window.h);
            const double cw = static_cast<double>(tok % window.w);
            for (size_t k = 0; k < heads * n; ++k) {
                ref[o++] = ct;
                ref[o++] = ch;
                ref[o++] = cw;
            }
        }
    }
    Array ref_points = Array::from_data({g, v, heads, n, 3}, std::move(ref));
    Array coords = clamp_per_last(add(ref_points, plan.offsets),
                                  {static_cast<double>(window.t - 1),
                                   static_cast<double>(window.h - 1),
                                   static_cast<double>(window.w - 1)});

    Array values = linear(windows, p.v_w, p.v_b);
    Array grid = reshape(values, {g, window.t, window.h, window.w, heads, d});

    Array ctx;
    {
        kernels::MacScope mac(counters ? &counters->aggregate : nullptr);
        Array sampled = trilinear_gather(grid, coords);            // (G, V, H, N, d)
        Array w = reshape(plan.weights, {g, v, heads, 1, n});      // row vector per query
        ctx = matmul(w, sampled);                                  // (G, V, H, 1, d)
    }
    return linear(reshape(ctx, {g, v, c}), p.out_w, p.out_b);
}

Array deformable_window_attention(const Array& windows, Dims3 window, const DeformParams& p,
                                  MacCounters* counters) {
    SamplePlan plan = predict_sample_plan(windows, p, counters);
    return deformable_attention_with_plan(windows, window, p, plan, counters);
}

Array trilinear_sample(const Array& grid, double t, double h, double w) {
    if (grid.rank() != 4) {
        throw contract_error("trilinear_sample: expected a (t, h, w, c) grid, got " +
                             grid.shape_str());
    }
    const size_t dt = grid.shape()[0], dh = grid.shape()[1], dw = grid.shape()[2];
    const size_t c = grid.shape()[3];
    const double coords[3] = {t, h, w};
    const size_t dims[3] = {dt, dh, dw};
    size_t base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        if (!(coords[a] >= 0.0) || coords[a] > static_cast<double>(dims[a] - 1)) {
            throw contract_error("trilinear_sample: coordinate outside [0, dim-1]");
        }
        if (dims[a] == 1) {
            base[a] = 0;
            frac[a] = 0.0;
        } else {
            double fl = std::floor(coords[a]);
            if (fl > static_cast<double>(dims[a] - 2)) fl = static_cast<double>(dims[a] - 2);
            base[a] = static_cast<size_t>(fl);
            frac[a] = coords[a] - fl;
        }
    }
    Array out = Array::zeros({c});
    for (int ct = 0; ct < 2; ++ct) {
        for (int ch = 0; ch < 2; ++ch) {
            for (int cw = 0; cw < 2; ++cw) {
                const double wt = (ct ? frac[0] : 1.0 - frac[0]) *
                                  (ch ? frac[1] : 1.0 - frac[1]) *
                                  (cw ? frac[2] : 1.0 - frac[2]);
                const size_t it = std::min(base[0] + ct, dt - 1);
                const size_t ih = std::min(base[1] + ch, dh - 1);
                const size_t iw = std::min(base[2] + cw, dw - 1);
                const double* src = grid.data() + ((it * dh + ih) * dw + iw) * c;
                for (size_t k = 0; k < c; ++k) out.data()[k] += wt * src[k];
            }
        }
    }
    return out;
}

FlopReport count_flops(AttentionKind kind, Dims3 window, size_t channels, size_t heads,
                       size_t n_points, uint64_t seed) {
    const size_t v = window.volume();
    SplitMix64 rng(mix_streams(seed, 0xF10));
    auto rand_array = [&](std::vector<size_t> shape) {
        Array a = Array::zeros(std::move(shape));
        for (double& x : a.vec()) x = rng.uniform(-1.0, 1.0);
        return a;
    };

    Array windows = rand_array({1, v, channels});
    MacCounters counters;
    if (kind == AttentionKind::dense_window) {
        AttentionParams p;
        p.heads = heads;
        p.q_w = rand_array({channels, channels});
        p.q_b = rand_array({channels});
        p.k_w = rand_array({channels, channels});
        p.k_b = rand_array({channels});
        p.v_w = rand_array({channels, channels});
        p.v_b = rand_array({channels});
        p.out_w = rand_array({channels, channels});
        p.out_b = rand_array({channels});
        p.relpos_table = rand_array({relpos_rows(window), heads});
        p.relpos_idx = relpos_index(window);
        window_msa(windows, p, nullptr, 1, &counters);
    } else {
        DeformParams p;
        p.heads = heads;
        p.n_points = n_points;
        p.offset_scale = 1.0;
        p.v_w = rand_array({channels, channels});
        p.v_b = rand_array({channels});
        p.off_w = rand_array({channels, heads * n_points * 3});
        p.off_b = rand_array({heads * n_points * 3});
        p.wgt_w = rand_array({channels, heads * n_points});
        p.wgt_b = rand_array({heads * n_points});
        p.out_w = rand_array({channels, channels});
        p.out_b = rand_array({channels});
        // keep every sampling point inside the lattice so the probe exercises
        // the same code path as training
        for (double& x : p.off_b.vec()) x *= 0.25;
        deformable_window_attention(windows, window, p, &counters);
    }
    FlopReport r;
    r.score = counters.score / v;
    r.offsets = counters.offsets / v;
    r.aggregate = counters.aggregate / v;
    return r;
}

}  // namespace swinvid
