#include "swinvid/swin.hpp"

#include <cmath>
#include <cstdint>

#include "swinvid/deform.hpp"
#include "swinvid/errors.hpp"
#include "swinvid/kernels.hpp"
#include "swinvid/rng.hpp"

namespace swinvid {

namespace {

std::string dims_str(Dims3 d) {
    return "(" + std::to_string(d.t) + "," + std::to_string(d.h) + "," + std::to_string(d.w) + ")";
}

void check_feature_rank(const Array& x, const char* op) {
    if (x.rank() != 5) {
        throw contract_error(std::string(op) + ": expected a (batch, t, h, w, c) tensor, got " +
                             x.shape_str());
    }
}

Dims3 feature_dims(const Array& x) {
    return {x.shape()[1], x.shape()[2], x.shape()[3]};
}

void check_divisible(Dims3 dims, Dims3 window, const char* op) {
    if (dims.t % window.t || dims.h % window.h || dims.w % window.w) {
        throw contract_error(std::string(op) + ": dims " + dims_str(dims) +
                             " not divisible by window " + dims_str(window));
    }
}

size_t ceil_multiple(size_t n, size_t m) { return (n + m - 1) / m * m; }

}  // namespace

void SwinConfig::validate() const {
    if (patch_size.volume() == 0 || window_size.volume() == 0) {
        throw contract_error("config: patch and window dims must all be >= 1");
    }
    if (embed_dim == 0 || in_channels == 0) {
        throw contract_error("config: embed_dim and in_channels must be >= 1");
    }
    if (depths.empty() || depths.size() != num_heads.size()) {
        throw contract_error("config: depths and num_heads must be non-empty and equal length");
    }
    for (size_t s = 0; s < num_heads.size(); ++s) {
        if (num_heads[s] == 0 || stage_channels(s) % num_heads[s] != 0) {
            throw contract_error("config: stage " + std::to_string(s) + " channels " +
                                 std::to_string(stage_channels(s)) + " not divisible by " +
                                 std::to_string(num_heads[s]) + " heads");
        }
    }
    if (mlp_ratio == 0) throw contract_error("config: mlp_ratio must be >= 1");
    if (attention_kind == AttentionKind::deformable && n_points == 0) {
        throw contract_error("config: n_points must be >= 1");
    }
}

// ---- parameter registry -------------------------------------------------------

Array ParamStore::add(const std::string& name, std::vector<size_t> shape) {
    for (const auto& e : entries_) {
        if (e.first == name) throw contract_error("duplicate parameter name: " + name);
    }
    Array a = Array::zeros(std::move(shape), true);
    entries_.emplace_back(name, a);
    return a;
}

std::vector<Array> ParamStore::all() const {
    std::vector<Array> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.second);
    return out;
}

Array ParamStore::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.first == name) return e.second;
    }
    throw contract_error("unknown parameter: " + name);
}

// ---- geometry -----------------------------------------------------------------

namespace {

// (B,T,H,W,C) flattened source index
inline int64_t feature_flat(size_t b, size_t t, size_t h, size_t w, size_t c, Dims3 d, size_t C) {
    return static_cast<int64_t>((((b * d.t + t) * d.h + h) * d.w + w) * C + c);
}

void window_maps(size_t B, Dims3 d, size_t C, Dims3 win, std::vector<int64_t>* fwd,
                 std::vector<int64_t>* rev) {
    const size_t n = B * d.volume() * C;
    if (fwd) fwd->resize(n);
    if (rev) rev->resize(n);
    size_t o = 0;
    for (size_t b = 0; b < B; ++b) {
        for (size_t it = 0; it < d.t / win.t; ++it) {
            for (size_t ih = 0; ih < d.h / win.h; ++ih) {
                for (size_t iw = 0; iw < d.w / win.w; ++iw) {
                    for (size_t tt = 0; tt < win.t; ++tt) {
                        for (size_t th = 0; th < win.h; ++th) {
                            for (size_t tw = 0; tw < win.w; ++tw) {
                                for (size_t c = 0; c < C; ++c, ++o) {
                                    const int64_t src =
                                        feature_flat(b, it * win.t + tt, ih * win.h + th,
                                                     iw * win.w + tw, c, d, C);
                                    if (fwd) (*fwd)[o] = src;
                                    if (rev) (*rev)[static_cast<size_t>(src)] =
                                        static_cast<int64_t>(o);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Array window_partition(const Array& x, Dims3 window) {
    check_feature_rank(x, "window_partition");
    const Dims3 d = feature_dims(x);
    check_divisible(d, window, "window_partition");
    const size_t B = x.shape()[0], C = x.shape()[4];
    const size_t nw = (d.t / window.t) * (d.h / window.h) * (d.w / window.w);
    auto fwd = std::make_shared<std::vector<int64_t>>();
    window_maps(B, d, C, window, fwd.get(), nullptr);
    return take(x, fwd, {B * nw, window.volume(), C});
}

Array window_reverse(const Array& windows, size_t batch, Dims3 dims, Dims3 window) {
    if (windows.rank() != 3) {
        throw contract_error("window_reverse: expected (groups, tokens, c), got " +
                             windows.shape_str());
    }
    check_divisible(dims, window, "window_reverse");
    const size_t nw = (dims.t / window.t) * (dims.h / window.h) * (dims.w / window.w);
    if (windows.shape()[0] != batch * nw || windows.shape()[1] != window.volume()) {
        throw contract_error("window_reverse: " + windows.shape_str() +
                             " inconsistent with dims " + dims_str(dims) + " and window " +
                             dims_str(window));
    }
    const size_t C = windows.shape()[2];
    auto rev = std::make_shared<std::vector<int64_t>>();
    window_maps(batch, dims, C, window, nullptr, rev.get());
    return take(windows, rev, {batch, dims.t, dims.h, dims.w, C});
}

namespace {

Array roll_by(const Array& x, Dims3 shifts) {
    check_feature_rank(x, "cyclic_shift");
    const Dims3 d = feature_dims(x);
    const size_t B = x.shape()[0], C = x.shape()[4];
    auto idx = std::make_shared<std::vector<int64_t>>(x.numel());
    size_t o = 0;
    for (size_t b = 0; b < B; ++b) {
        for (size_t t = 0; t < d.t; ++t) {
            const size_t ts = (t + shifts.t) % d.t;
            for (size_t h = 0; h < d.h; ++h) {
                const size_t hs = (h + shifts.h) % d.h;
                for (size_t w = 0; w < d.w; ++w) {
                    const size_t ws = (w + shifts.w) % d.w;
                    for (size_t c = 0; c < C; ++c, ++o) {
                        (*idx)[o] = feature_flat(b, ts, hs, ws, c, d, C);
                    }
                }
            }
        }
    }
    return take(x, idx, x.shape());
}

}  // namespace

Array cyclic_shift(const Array& x, Dims3 shifts) { return roll_by(x, shifts); }

Array cyclic_unshift(const Array& x, Dims3 shifts) {
    const Dims3 d = feature_dims(x);
    return roll_by(x, {(d.t - shifts.t % d.t) % d.t, (d.h - shifts.h % d.h) % d.h,
                       (d.w - shifts.w % d.w) % d.w});
}

Array pad_to_multiple(const Array& x, Dims3 multiple, Dims3* padded) {
    check_feature_rank(x, "pad_to_multiple");
    const Dims3 d = feature_dims(x);
    const Dims3 p{ceil_multiple(d.t, multiple.t), ceil_multiple(d.h, multiple.h),
                  ceil_multiple(d.w, multiple.w)};
    if (padded) *padded = p;
    if (p == d) return x;
    const size_t B = x.shape()[0], C = x.shape()[4];
    auto idx = std::make_shared<std::vector<int64_t>>(B * p.volume() * C);
    size_t o = 0;
    for (size_t b = 0; b < B; ++b) {
        for (size_t t = 0; t < p.t; ++t) {
            for (size_t h = 0; h < p.h; ++h) {
                for (size_t w = 0; w < p.w; ++w) {
                    const bool in = t < d.t && h < d.h && w < d.w;
                    for (size_t c = 0; c < C; ++c, ++o) {
                        (*idx)[o] = in ? feature_flat(b, t, h, w, c, d, C) : -1;
                    }
                }
            }
        }
    }
    return take(x, idx, {B, p.t, p.h, p.w, C});
}

Array crop_to(const Array& x, Dims3 dims) {
    check_feature_rank(x, "crop_to");
    const Dims3 d = feature_dims(x);
    if (dims.t > d.t || dims.h > d.h || dims.w > d.w) {
        throw contract_error("crop_to: target " + dims_str(dims) + " exceeds source " +
                             dims_str(d));
    }
    if (dims == d) return x;
    const size_t B = x.shape()[0], C = x.shape()[4];
    auto idx = std::make_shared<std::vector<int64_t>>(B * dims.volume() * C);
    size_t o = 0;
    for (size_t b = 0; b < B; ++b) {
        for (size_t t = 0; t < dims.t; ++t) {
            for (size_t h = 0; h < dims.h; ++h) {
                for (size_t w = 0; w < dims.w; ++w) {
                    for (size_t c = 0; c < C; ++c, ++o) {
                        (*idx)[o] = feature_flat(b, t, h, w, c, d, C);
                    }
                }
            }
        }
    }
    return take(x, idx, {B, dims.t, dims.h, dims.w, C});
}

// ---- attention ingredients ----------------------------------------------------

size_t relpos_rows(Dims3 window) {
    return (2 * window.t - 1) * (2 * window.h - 1) * (2 * window.w - 1);
}

std::shared_ptr<const std::vector<int32_t>> relpos_index(Dims3 window) {
    const size_t v = window.volume();
    auto idx = std::make_shared<std::vector<int32_t>>(v * v);
    auto coord = [&](size_t tok, size_t* t, size_t* h, size_t* w) {
        *w = tok % window.w;
        *h = (tok / window.w) % window.h;
        *t = tok / (window.w * window.h);
    };
    for (size_t i = 0; i < v; ++i) {
        size_t ti, hi, wi;
        coord(i, &ti, &hi, &wi);
        for (size_t j = 0; j < v; ++j) {
            size_t tj, hj, wj;
            coord(j, &tj, &hj, &wj);
            const size_t dt = ti - tj + window.t - 1;
            const size_t dh = hi - hj + window.h - 1;
            const size_t dw = wi - wj + window.w - 1;
            (*idx)[i * v + j] =
                static_cast<int32_t>((dt * (2 * window.h - 1) + dh) * (2 * window.w - 1) + dw);
        }
    }
    return idx;
}

std::shared_ptr<std::vector<double>> attention_mask_padded(Dims3 padded, Dims3 orig,
                                                           Dims3 window, Dims3 shifts) {
    check_divisible(padded, window, "attention_mask");
    if (orig.t > padded.t || orig.h > padded.h || orig.w > padded.w) {
        throw contract_error("attention_mask: original dims exceed the padded canvas");
    }
    // Band id of a post-roll position along one axis. The roll moves original
    // coordinate o to position (o - s) mod L, so positions [L-s, L) hold the
    // wrapped tokens; [L-w, L-s) is the tail that now shares a window with
    // them; everything below L-w never mixes across the seam.
    auto band = [](size_t r, size_t len, size_t win, size_t s) -> int {
        if (s == 0) return 0;
        if (r < len - win) return 0;
        if (r < len - s) return 1;
        return 2;
    };
    const size_t nt = padded.t / window.t, nh = padded.h / window.h, nw = padded.w / window.w;
    const size_t v = window.volume();
    const size_t n_windows = nt * nh * nw;

    // per-canvas-position region key and validity (pads are invalid)
    std::vector<int> key(padded.volume());
    std::vector<char> valid(padded.volume());
    size_t o = 0;
    for (size_t t = 0; t < padded.t; ++t) {
        const int bt = band(t, padded.t, window.t, shifts.t % window.t);
        const bool vt = (t + shifts.t) % padded.t < orig.t;
        for (size_t h = 0; h < padded.h; ++h) {
            const int bh = band(h, padded.h, window.h, shifts.h % window.h);
            const bool vh = (h + shifts.h) % padded.h < orig.h;
            for (size_t w = 0; w < padded.w; ++w, ++o) {
                const int bw = band(w, padded.w, window.w, shifts.w % window.w);
                const bool vw = (w + shifts.w) % padded.w < orig.w;
                key[o] = (bt * 3 + bh) * 3 + bw;
                valid[o] = vt && vh && vw;
            }
        }
    }

    auto mask = std::make_shared<std::vector<double>>(n_windows * v * v, 0.0);
    std::vector<int> wkey(v);
    std::vector<char> wvalid(v);
    for (size_t it = 0; it < nt; ++it) {
        for (size_t ih = 0; ih < nh; ++ih) {
            for (size_t iw = 0; iw < nw; ++iw) {
                const size_t widx = (it * nh + ih) * nw + iw;
                size_t tok = 0;
                for (size_t tt = 0; tt < window.t; ++tt) {
                    for (size_t th = 0; th < window.h; ++th) {
                        for (size_t tw = 0; tw < window.w; ++tw, ++tok) {
                            const size_t pos = ((it * window.t + tt) * padded.h +
                                                (ih * window.h + th)) *
                                                   padded.w +
                                               (iw * window.w + tw);
                            wkey[tok] = key[pos];
                            wvalid[tok] = valid[pos];
                        }
                    }
                }
                double* m = mask->data() + widx * v * v;
                for (size_t i = 0; i < v; ++i) {
                    for (size_t j = 0; j < v; ++j) {
                        const bool ok = wkey[i] == wkey[j] && wvalid[i] && wvalid[j];
                        m[i * v + j] = ok ? 0.0 : -1e9;
                    }
                }
            }
        }
    }
    return mask;
}

std::shared_ptr<std::vector<double>> attention_mask(Dims3 dims, Dims3 window, Dims3 shifts) {
    return attention_mask_padded(dims, dims, window, shifts);
}

// ---- dense window attention -----------------------------------------------------

namespace {

// (G, V, C) -> (G, heads, V, C/heads)
Array split_heads(const Array& x, size_t heads) {
    const size_t g = x.shape()[0], v = x.shape()[1], c = x.shape()[2];
    Array r = reshape(x, {g, v, heads, c / heads});
    std::vector<size_t> out_shape;
    IndexMap m = permute_map(r.shape(), {0, 2, 1, 3}, &out_shape);
    return take(r, m, out_shape);
}

// (G, heads, V, d) -> (G, V, heads*d)
Array merge_heads(const Array& x) {
    const size_t g = x.shape()[0], h = x.shape()[1], v = x.shape()[2], d = x.shape()[3];
    std::vector<size_t> out_shape;
    IndexMap m = permute_map(x.shape(), {0, 2, 1, 3}, &out_shape);
    return reshape(take(x, m, out_shape), {g, v, h * d});
}

}  // namespace

Array window_msa(const Array& windows, const AttentionParams& p,
                 std::shared_ptr<const std::vector<double>> mask, size_t num_windows,
                 MacCounters* counters) {
    if (windows.rank() != 3) {
        throw contract_error("window_msa: expected (groups, tokens, c), got " +
                             windows.shape_str());
    }
    const size_t c = windows.shape()[2];
    if (p.heads == 0 || c % p.heads != 0) {
        throw contract_error("window_msa: " + std::to_string(c) + " channels not divisible by " +
                             std::to_string(p.heads) + " heads");
    }
    const size_t d = c / p.heads;

    Array q = split_heads(linear(windows, p.q_w, p.q_b), p.heads);
    Array k = split_heads(linear(windows, p.k_w, p.k_b), p.heads);
    Array v = split_heads(linear(windows, p.v_w, p.v_b), p.heads);

    Array kt = transpose_last2(k);
    Array scores;
    {
        kernels::MacScope mac(counters ? &counters->score : nullptr);
        scores = matmul(q, kt);
        scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(d)));
    }
    scores = relpos_bias_add(scores, p.relpos_table, p.relpos_idx);
    if (mask) scores = add_window_mask(scores, mask, num_windows);
    Array attn = softmax(scores, 3);

    Array ctx;
    {
        kernels::MacScope mac(counters ? &counters->aggregate : nullptr);
        ctx = matmul(attn, v);
    }
    return linear(merge_heads(ctx), p.out_w, p.out_b);
}

// ---- blocks ---------------------------------------------------------------------

Array swin_block(const Array& x, const BlockParams& p, const SwinConfig& cfg, size_t stage,
                 bool shifted, MacCounters* counters) {
    check_feature_rank(x, "swin_block");
    const Dims3 orig = feature_dims(x);
    const size_t batch = x.shape()[0];
    const Dims3 window = cfg.window_size;
    const Dims3 shifts = shifted ? cfg.shift_size() : Dims3{0, 0, 0};
    (void)stage;

    Array y = layer_norm(x, p.norm1_g, p.norm1_b);
    Dims3 padded;
    y = pad_to_multiple(y, window, &padded);
    if (shifted) y = cyclic_shift(y, shifts);

    const size_t nw =
        (padded.t / window.t) * (padded.h / window.h) * (padded.w / window.w);
    Array windows = window_partition(y, window);

    Array attn_out;
    if (cfg.attention_kind == AttentionKind::dense_window) {
        std::shared_ptr<std::vector<double>> mask;
        if (shifted || !(padded == orig)) {
            mask = attention_mask_padded(padded, orig, window, shifts);
        }
        attn_out = window_msa(windows, p.attn, mask, nw, counters);
    } else {
        if (!p.deform) throw contract_error("swin_block: deformable block has no sampler params");
        attn_out = deformable_window_attention(windows, window, *p.deform, counters);
    }

    Array merged = window_reverse(attn_out, batch, padded, window);
    if (shifted) merged = cyclic_unshift(merged, shifts);
    merged = crop_to(merged, orig);

    Array res = add(x, merged);
    Array z = layer_norm(res, p.norm2_g, p.norm2_b);
    z = linear(z, p.fc1_w, p.fc1_b);
    z = gelu(z);
    z = linear(z, p.fc2_w, p.fc2_b);
    return add(res, z);
}

Array patch_merging(const Array& x, const MergeParams& p) {
    check_feature_rank(x, "patch_merging");
    const Dims3 d = feature_dims(x);
    if (d.h % 2 || d.w % 2) {
        throw contract_error("patch_merging: spatial dims " + dims_str(d) + " must be even");
    }
    const size_t B = x.shape()[0], C = x.shape()[4];
    auto idx = std::make_shared<std::vector<int64_t>>(B * d.t * (d.h / 2) * (d.w / 2) * 4 * C);
    size_t o = 0;
    for (size_t b = 0; b < B; ++b) {
        for (size_t t = 0; t < d.t; ++t) {
            for (size_t h = 0; h < d.h / 2; ++h) {
                for (size_t w = 0; w < d.w / 2; ++w) {
                    for (size_t dh = 0; dh < 2; ++dh) {
                        for (size_t dw = 0; dw < 2; ++dw) {
                            for (size_t c = 0; c < C; ++c, ++o) {
                                (*idx)[o] =
                                    feature_flat(b, t, 2 * h + dh, 2 * w + dw, c, d, C);
                            }
                        }
                    }
                }
            }
        }
    }
    Array grouped = take(x, idx, {B, d.t, d.h / 2, d.w / 2, 4 * C});
    Array normed = layer_norm(grouped, p.norm_g, p.norm_b);
    return linear(normed, p.reduce_w, Array());
}

Array patch_embed(const Array& video, const SwinConfig& cfg, const Array& w, const Array& b) {
    check_feature_rank(video, "patch_embed");
    if (video.shape()[4] != cfg.in_channels) {
        throw contract_error("patch_embed: expected " + std::to_string(cfg.in_channels) +
                             " input channels, got " + std::to_string(video.shape()[4]));
    }
    Dims3 padded;
    Array x = pad_to_multiple(video, cfg.patch_size, &padded);
    const Dims3 ps = cfg.patch_size;
    const Dims3 grid{padded.t / ps.t, padded.h / ps.h, padded.w / ps.w};
    const size_t B = video.shape()[0], cin = cfg.in_channels;
    const size_t patch_len = ps.volume() * cin;

    auto idx = std::make_shared<std::vector<int64_t>>(B * grid.volume() * patch_len);
    size_t o = 0;
    for (size_t bi = 0; bi < B; ++bi) {
        for (size_t t = 0; t < grid.t; ++t) {
            for (size_t h = 0; h < grid.h; ++h) {
                for (size_t w2 = 0; w2 < grid.w; ++w2) {
                    for (size_t dt = 0; dt < ps.t; ++dt) {
                        for (size_t dh = 0; dh < ps.h; ++dh) {
                            for (size_t dw = 0; dw < ps.w; ++dw) {
                                for (size_t c = 0; c < cin; ++c, ++o) {
                                    (*idx)[o] = feature_flat(bi, t * ps.t + dt, h * ps.h + dh,
                                                             w2 * ps.w + dw, c, padded, cin);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Array patches = take(x, idx, {B * grid.volume(), patch_len});
    Array tokens = add_bias(matmul(patches, w), b);
    return reshape(tokens, {B, grid.t, grid.h, grid.w, cfg.embed_dim});
}

// ---- full backbone ----------------------------------------------------------------

SwinBackbone::SwinBackbone(const SwinConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    SplitMix64 rng(mix_streams(seed, 0x5741));

    auto weight = [&](const std::string& name, std::vector<size_t> shape) {
        Array a = params_.add(name, std::move(shape));
        for (double& v : a.vec()) v = rng.trunc_normal(0.02);
        return a;
    };
    auto zero = [&](const std::string& name, std::vector<size_t> shape) {
        return params_.add(name, std::move(shape));
    };
    auto ones = [&](const std::string& name, size_t n) {
        Array a = params_.add(name, {n});
        for (double& v : a.vec()) v = 1.0;
        return a;
    };

    embed_w_ = weight("embed.weight", {cfg_.patch_size.volume() * cfg_.in_channels,
                                       cfg_.embed_dim});
    embed_b_ = zero("embed.bias", {cfg_.embed_dim});

    stages_.resize(cfg_.depths.size());
    for (size_t s = 0; s < cfg_.depths.size(); ++s) {
        const size_t c = cfg_.stage_channels(s);
        const size_t heads = cfg_.num_heads[s];
        const std::string sp = "stage" + std::to_string(s) + ".";
        StageParams& stage = stages_[s];
        stage.blocks.resize(cfg_.depths[s]);
        for (size_t bi = 0; bi < cfg_.depths[s]; ++bi) {
            const std::string bp = sp + "block" + std::to_string(bi) + ".";
            BlockParams& blk = stage.blocks[bi];
            blk.norm1_g = ones(bp + "norm1.gamma", c);
            blk.norm1_b = zero(bp + "norm1.beta", {c});
            if (cfg_.attention_kind == AttentionKind::dense_window) {
                AttentionParams& a = blk.attn;
                a.heads = heads;
                a.q_w = weight(bp + "attn.q.weight", {c, c});
                a.q_b = zero(bp + "attn.q.bias", {c});
                a.k_w = weight(bp + "attn.k.weight", {c, c});
                a.k_b = zero(bp + "attn.k.bias", {c});
                a.v_w = weight(bp + "attn.v.weight", {c, c});
                a.v_b = zero(bp + "attn.v.bias", {c});
                a.out_w = weight(bp + "attn.out.weight", {c, c});
                a.out_b = zero(bp + "attn.out.bias", {c});
                a.relpos_table = weight(bp + "attn.relpos.table",
                                        {relpos_rows(cfg_.window_size), heads});
                a.relpos_idx = relpos_index(cfg_.window_size);
            } else {
                blk.deform = std::make_shared<DeformParams>();
                DeformParams& dp = *blk.deform;
                dp.heads = heads;
                dp.n_points = cfg_.n_points;
                dp.offset_scale = cfg_.offset_scale;
                dp.v_w = weight(bp + "attn.v.weight", {c, c});
                dp.v_b = zero(bp + "attn.v.bias", {c});
                // offset and weight heads start at zero so every query begins
                // by sampling its own cell with uniform weights
                dp.off_w = zero(bp + "attn.offsets.weight", {c, heads * cfg_.n_points * 3});
                dp.off_b = zero(bp + "attn.offsets.bias", {heads * cfg_.n_points * 3});
                dp.wgt_w = zero(bp + "attn.weights.weight", {c, heads * cfg_.n_points});
                dp.wgt_b = zero(bp + "attn.weights.bias", {heads * cfg_.n_points});
                dp.out_w = weight(bp + "attn.out.weight", {c, c});
                dp.out_b = zero(bp + "attn.out.bias", {c});
            }
            blk.norm2_g = ones(bp + "norm2.gamma", c);
            blk.norm2_b = zero(bp + "norm2.beta", {c});
            blk.fc1_w = weight(bp + "mlp.fc1.weight", {c, cfg_.mlp_ratio * c});
            blk.fc1_b = zero(bp + "mlp.fc1.bias", {cfg_.mlp_ratio * c});
            blk.fc2_w = weight(bp + "mlp.fc2.weight", {cfg_.mlp_ratio * c, c});
            blk.fc2_b = zero(bp + "mlp.fc2.bias", {c});
        }
        stage.has_merge = s + 1 < cfg_.depths.size();
        if (stage.has_merge) {
            stage.merge.norm_g = ones(sp + "merge.norm.gamma", 4 * c);
            stage.merge.norm_b = zero(sp + "merge.norm.beta", {4 * c});
            stage.merge.reduce_w = weight(sp + "merge.reduce.weight", {4 * c, 2 * c});
        }
    }
}

FeatureMap SwinBackbone::forward(const Array& video) {
    counters_.reset();
    Array x = patch_embed(video, cfg_, embed_w_, embed_b_);
    for (size_t s = 0; s < stages_.size(); ++s) {
        for (size_t bi = 0; bi < stages_[s].blocks.size(); ++bi) {
            x = swin_block(x, stages_[s].blocks[bi], cfg_, s, bi % 2 == 1, &counters_);
        }
        if (stages_[s].has_merge) x = patch_merging(x, stages_[s].merge);
    }
    return FeatureMap{x};
}

}  // namespace swinvid
