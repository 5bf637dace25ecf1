#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "swinvid/swin.hpp"

// Deformable window attention: instead of scoring every token pair inside a
// window, each query predicts N continuous sampling locations (offsets from
// its own cell) plus N mixing weights, and aggregates trilinearly-interpolated
// values from those points. Per-query cost depends on N, not window volume.

namespace swinvid {

struct DeformConfig {
    size_t n_points = 4;
    double offset_scale = 1.0;  // multiplier on predicted offsets, in cell units
    size_t heads = 1;

    void validate() const;  // throws contract_error on violated invariants
};

struct DeformParams {
    Array v_w, v_b;
    Array out_w, out_b;
    Array off_w, off_b;  // (C, heads*N*3): per-head (dt,dh,dw) per point
    Array wgt_w, wgt_b;  // (C, heads*N): mixing-weight logits
    size_t heads = 1;
    size_t n_points = 4;
    double offset_scale = 1.0;
};

// per-query sampling locations and mixing weights for one window batch
struct SamplePlan {
    Array offsets;  // (G, V, heads, N, 3) continuous displacements
    Array weights;  // (G, V, heads, N), softmax-normalized over N
};

// offsets = offset_scale * linear(queries); weights = softmax_N(linear(queries))
SamplePlan predict_sample_plan(const Array& queries, const DeformParams& p,
                               MacCounters* counters);

// aggregate with an externally supplied plan (reference points are each
// query's own cell; coordinates are clamped into the window box)
Array deformable_attention_with_plan(const Array& windows, Dims3 window,
                                     const DeformParams& p, const SamplePlan& plan,
                                     MacCounters* counters);

// predict_sample_plan + deformable_attention_with_plan
Array deformable_window_attention(const Array& windows, Dims3 window, const DeformParams& p,
                                  MacCounters* counters);

// standalone 8-corner interpolation of one point on a (t, h, w, C) grid;
// coord components must already lie in [0, dim-1]
Array trilinear_sample(const Array& grid, double t, double h, double w);

// per-query multiply-add cost measured by running an instrumented attention
// call on a probe window and dividing by the query count
struct FlopReport {
    unsigned long long score = 0;
    unsigned long long offsets = 0;
    unsigned long long aggregate = 0;

    unsigned long long total() const { return score + offsets + aggregate; }
};

FlopReport count_flops(AttentionKind kind, Dims3 window, size_t channels, size_t heads,
                       size_t n_points, uint64_t seed = 12345);

}  // namespace swinvid
