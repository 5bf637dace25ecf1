#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "swinvid/deform.hpp"
#include "swinvid/ops.hpp"
#include "swinvid/swin.hpp"
#include "testutil.hpp"

using namespace swinvid;

namespace {

AttentionParams random_attention(size_t c, size_t heads, Dims3 window, uint64_t seed) {
    AttentionParams p;
    p.heads = heads;
    p.q_w = testutil::random_array({c, c}, seed + 1, -0.4, 0.4);
    p.q_b = testutil::random_array({c}, seed + 2, -0.2, 0.2);
    p.k_w = testutil::random_array({c, c}, seed + 3, -0.4, 0.4);
    p.k_b = testutil::random_array({c}, seed + 4, -0.2, 0.2);
    p.v_w = testutil::random_array({c, c}, seed + 5, -0.4, 0.4);
    p.v_b = testutil::random_array({c}, seed + 6, -0.2, 0.2);
    p.out_w = testutil::random_array({c, c}, seed + 7, -0.4, 0.4);
    p.out_b = testutil::random_array({c}, seed + 8, -0.2, 0.2);
    p.relpos_table = testutil::random_array({relpos_rows(window), heads}, seed + 9, -0.3, 0.3);
    p.relpos_idx = relpos_index(window);
    return p;
}

BlockParams random_dense_block(size_t c, size_t heads, Dims3 window, size_t mlp_ratio,
                               uint64_t seed) {
    BlockParams p;
    p.norm1_g = testutil::random_array({c}, seed + 20, 0.8, 1.2);
    p.norm1_b = testutil::random_array({c}, seed + 21, -0.1, 0.1);
    p.attn = random_attention(c, heads, window, seed);
    p.norm2_g = testutil::random_array({c}, seed + 22, 0.8, 1.2);
    p.norm2_b = testutil::random_array({c}, seed + 23, -0.1, 0.1);
    p.fc1_w = testutil::random_array({c, mlp_ratio * c}, seed + 24, -0.3, 0.3);
    p.fc1_b = testutil::random_array({mlp_ratio * c}, seed + 25, -0.1, 0.1);
    p.fc2_w = testutil::random_array({mlp_ratio * c, c}, seed + 26, -0.3, 0.3);
    p.fc2_b = testutil::random_array({c}, seed + 27, -0.1, 0.1);
    return p;
}

}  // namespace

TEST_CASE("window partition layout and round trip") {
    const size_t c = 3;
    Array x = testutil::random_array({1, 4, 8, 8, c}, 101);
    Array win = window_partition(x, {2, 4, 4});
    REQUIRE(win.shape() == std::vector<size_t>{8, 32, c});

    // windows tile in (t, h, w) raster order; tokens inside a window likewise
    auto at = [&](size_t t, size_t h, size_t w, size_t ch) {
        return x.data()[((t * 8 + h) * 8 + w) * c + ch];
    };
    for (size_t it = 0; it < 2; ++it) {
        for (size_t ih = 0; ih < 2; ++ih) {
            for (size_t iw = 0; iw < 2; ++iw) {
                const size_t g = (it * 2 + ih) * 2 + iw;
                for (size_t tt = 0; tt < 2; ++tt) {
                    for (size_t th = 0; th < 4; ++th) {
                        for (size_t tw = 0; tw < 4; ++tw) {
                            const size_t tok = (tt * 4 + th) * 4 + tw;
                            for (size_t ch = 0; ch < c; ++ch) {
                                CHECK(win.data()[(g * 32 + tok) * c + ch] ==
                                      at(it * 2 + tt, ih * 4 + th, iw * 4 + tw, ch));
                            }
                        }
                    }
                }
            }
        }
    }

    Array back = window_reverse(win, 1, {4, 8, 8}, {2, 4, 4});
    REQUIRE(back.numel() == x.numel());
    CHECK(std::memcmp(back.data(), x.data(), x.numel() * sizeof(double)) == 0);
}

TEST_CASE("window equal to full volume is a reshape") {
    Array x = testutil::random_array({2, 2, 3, 3, 4}, 102);
    Array win = window_partition(x, {2, 3, 3});
    REQUIRE(win.shape() == std::vector<size_t>{2, 18, 4});
    CHECK(std::memcmp(win.data(), x.data(), x.numel() * sizeof(double)) == 0);
}

TEST_CASE("window partition errors") {
    Array x = testutil::random_array({1, 4, 8, 8, 2}, 103);
    CHECK_THROWS_AS(window_partition(x, {3, 4, 4}), contract_error);
    CHECK_THROWS_AS(window_reverse(testutil::random_array({7, 32, 2}, 104), 1, {4, 8, 8},
                                   {2, 4, 4}),
                    contract_error);
}

TEST_CASE("cyclic shift semantics") {
    // [a,b,c,d] rolled by one: position r takes the value from (r+1) mod 4
    Array x = Array::from_data({1, 4, 1, 1, 1}, {1.0, 2.0, 3.0, 4.0});
    Array y = cyclic_shift(x, {1, 0, 0});
    CHECK(y.data()[0] == 2.0);
    CHECK(y.data()[1] == 3.0);
    CHECK(y.data()[2] == 4.0);
    CHECK(y.data()[3] == 1.0);

    Array z = cyclic_shift(x, {0, 0, 0});
    CHECK(std::memcmp(z.data(), x.data(), 4 * sizeof(double)) == 0);

    Array r = testutil::random_array({2, 4, 6, 8, 3}, 105);
    Array round = cyclic_unshift(cyclic_shift(r, {1, 2, 3}), {1, 2, 3});
    CHECK(std::memcmp(round.data(), r.data(), r.numel() * sizeof(double)) == 0);
}

TEST_CASE("padding and cropping") {
    Array x = testutil::random_array({1, 3, 5, 5, 2}, 106);
    Dims3 padded;
    Array y = pad_to_multiple(x, {2, 4, 4}, &padded);
    CHECK(padded == Dims3{4, 8, 8});
    REQUIRE(y.shape() == std::vector<size_t>{1, 4, 8, 8, 2});
    // pads are exact zeros
    for (size_t t = 0; t < 4; ++t) {
        for (size_t h = 0; h < 8; ++h) {
            for (size_t w = 0; w < 8; ++w) {
                if (t < 3 && h < 5 && w < 5) continue;
                for (size_t ch = 0; ch < 2; ++ch) {
                    CHECK(y.data()[((t * 8 + h) * 8 + w) * 2 + ch] == 0.0);
                }
            }
        }
    }
    Array back = crop_to(y, {3, 5, 5});
    CHECK(std::memcmp(back.data(), x.data(), x.numel() * sizeof(double)) == 0);

    // aligned input passes through without copying
    Array aligned = testutil::random_array({1, 4, 4, 4, 2}, 107);
    Dims3 same;
    Array thru = pad_to_multiple(aligned, {2, 4, 4}, &same);
    CHECK(same == Dims3{4, 4, 4});
    CHECK(thru.storage() == aligned.storage());

    CHECK_THROWS_AS(crop_to(x, {4, 5, 5}), contract_error);
}

TEST_CASE("relative position index map") {
    const Dims3 window{2, 4, 4};
    CHECK(relpos_rows(window) == 3 * 7 * 7);
    auto idx = relpos_index(window);
    const size_t v = window.volume();
    REQUIRE(idx->size() == v * v);

    const int32_t center = static_cast<int32_t>(((window.t - 1) * 7 + (window.h - 1)) * 7 +
                                                (window.w - 1));
    for (size_t i = 0; i < v; ++i) {
        CHECK((*idx)[i * v + i] == center);
        for (size_t j = 0; j < v; ++j) {
            CHECK((*idx)[i * v + j] >= 0);
            CHECK((*idx)[i * v + j] < static_cast<int32_t>(relpos_rows(window)));
        }
    }

    // the row depends only on the coordinate delta: token pairs displaced by
    // the same (dt,dh,dw) share a row
    auto tok = [&](size_t t, size_t h, size_t w) { return (t * window.h + h) * window.w + w; };
    CHECK((*idx)[tok(0, 1, 2) * v + tok(0, 0, 1)] == (*idx)[tok(1, 2, 3) * v + tok(1, 1, 2)]);
    CHECK((*idx)[tok(1, 0, 3) * v + tok(0, 2, 0)] == (*idx)[tok(1, 1, 3) * v + tok(0, 3, 0)]);
}

TEST_CASE("attention mask hand cases") {
    // zero shift: every pair permitted
    auto flat = attention_mask({4, 8, 8}, {2, 4, 4}, {0, 0, 0});
    for (double m : *flat) CHECK(m == 0.0);

    // 1D toy: length 4, window 2, shift 1. After rolling, positions 0..1 hold
    // original 1..2 (one region); position 2 holds original 3 and position 3
    // holds wrapped original 0, so the second window forbids the cross pair.
    auto m = attention_mask({4, 1, 1}, {2, 1, 1}, {1, 0, 0});
    REQUIRE(m->size() == 2 * 2 * 2);
    CHECK((*m)[0] == 0.0);
    CHECK((*m)[1] == 0.0);
    CHECK((*m)[2] == 0.0);
    CHECK((*m)[3] == 0.0);
    CHECK((*m)[4] == 0.0);
    CHECK((*m)[5] == -1e9);
    CHECK((*m)[6] == -1e9);
    CHECK((*m)[7] == 0.0);
}

TEST_CASE("attention mask over a padded canvas") {
    // canvas (2,4,4) holding an original (2,3,3): the 7 pad tokens per slice
    // are masked from everything, including themselves
    auto m = attention_mask_padded({2, 4, 4}, {2, 3, 3}, {2, 4, 4}, {0, 0, 0});
    const size_t v = 32;
    REQUIRE(m->size() == v * v);
    auto valid = [](size_t tok) {
        const size_t h = (tok / 4) % 4, w = tok % 4;
        return h < 3 && w < 3;
    };
    for (size_t i = 0; i < v; ++i) {
        for (size_t j = 0; j < v; ++j) {
            CHECK((*m)[i * v + j] == (valid(i) && valid(j) ? 0.0 : -1e9));
        }
    }
}

TEST_CASE("masked shifted attention equals the band-wise dense oracle") {
    const Dims3 dims{4, 8, 8};
    const Dims3 window{2, 4, 4};
    const size_t c = 16, heads = 2;
    Array x = testutil::random_array({1, dims.t, dims.h, dims.w, c}, 301);
    AttentionParams p = random_attention(c, heads, window, 310);

    const size_t st[] = {0, window.t / 2};
    const size_t sh[] = {0, window.h / 2};
    const size_t sw[] = {0, window.w / 2};
    for (size_t a : st) {
        for (size_t b : sh) {
            for (size_t d : sw) {
                CAPTURE(a);
                CAPTURE(b);
                CAPTURE(d);
                Array got = oracle::shifted_window_attention(x, window, {a, b, d}, p);
                std::vector<double> flat(x.data(), x.data() + x.numel());
                std::vector<double> want =
                    oracle::band_attention(flat, dims, c, window, {a, b, d}, p);
                REQUIRE(got.numel() == want.size());
                double worst = 0.0;
                for (size_t i = 0; i < want.size(); ++i) {
                    worst = std::max(worst, std::abs(got.data()[i] - want[i]));
                }
                CHECK(worst < 1e-6);
            }
        }
    }
}

TEST_CASE("window attention of a single token") {
    const size_t c = 4;
    Array x = testutil::random_array({1, 1, c}, 401);
    AttentionParams p = random_attention(c, 2, {1, 1, 1}, 402);
    Array y = window_msa(x, p, nullptr, 1, nullptr);

    // softmax over one key is 1, so the result is out(v(x))
    std::vector<double> v =
        oracle::affine(x.data(), 1, c, p.v_w.data(), p.v_b.data(), c);
    std::vector<double> want =
        oracle::affine(v.data(), 1, c, p.out_w.data(), p.out_b.data(), c);
    for (size_t i = 0; i < c; ++i) CHECK(y.data()[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("identical tokens attend uniformly") {
    const size_t c = 6, v = 8;
    Array row = testutil::random_array({c}, 403);
    Array x = Array::zeros({1, v, c});
    for (size_t t = 0; t < v; ++t) {
        for (size_t i = 0; i < c; ++i) x.data()[t * c + i] = row.data()[i];
    }
    AttentionParams p = random_attention(c, 2, {2, 2, 2}, 404);
    for (double& b : p.relpos_table.vec()) b = 0.0;
    Array y = window_msa(x, p, nullptr, 1, nullptr);
    for (size_t t = 1; t < v; ++t) {
        for (size_t i = 0; i < c; ++i) {
            CHECK(y.data()[t * c + i] == doctest::Approx(y.data()[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("two-token window matches a hand-computed mixture") {
    // heads=1, d=2, identity q/k, diagonal v, identity out; window (1,1,2)
    Array x = Array::from_data({1, 2, 2}, {1.0, 0.0, 0.0, 1.0});
    AttentionParams p;
    p.heads = 1;
    p.q_w = Array::from_data({2, 2}, {1, 0, 0, 1});
    p.q_b = Array::zeros({2});
    p.k_w = Array::from_data({2, 2}, {1, 0, 0, 1});
    p.k_b = Array::zeros({2});
    p.v_w = Array::from_data({2, 2}, {2, 0, 0, 3});
    p.v_b = Array::zeros({2});
    p.out_w = Array::from_data({2, 2}, {1, 0, 0, 1});
    p.out_b = Array::zeros({2});
    p.relpos_table = Array::from_data({3, 1}, {0.5, 0.0, -0.25});
    p.relpos_idx = relpos_index({1, 1, 2});

    Array y = window_msa(x, p, nullptr, 1, nullptr);

    const double inv = 1.0 / std::sqrt(2.0);
    // scores: s00 = 1/sqrt(2) + bias(delta 0); s01 = 0 + bias(delta -1); ...
    const double s00 = inv + 0.0, s01 = 0.0 + 0.5;
    const double s10 = 0.0 - 0.25, s11 = inv + 0.0;
    const double z0 = std::exp(s00) + std::exp(s01);
    const double z1 = std::exp(s10) + std::exp(s11);
    const double want[4] = {2.0 * std::exp(s00) / z0, 3.0 * std::exp(s01) / z0,
                            2.0 * std::exp(s10) / z1, 3.0 * std::exp(s11) / z1};
    for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("translation-equal windows produce equal attention") {
    const size_t c = 8, v = 32;
    Array one = testutil::random_array({v, c}, 405);
    Array x = Array::zeros({3, v, c});
    for (size_t g = 0; g < 3; ++g) {
        std::memcpy(x.data() + g * v * c, one.data(), v * c * sizeof(double));
    }
    AttentionParams p = random_attention(c, 2, {2, 4, 4}, 406);
    Array y = window_msa(x, p, nullptr, 3, nullptr);
    CHECK(std::memcmp(y.data(), y.data() + v * c, v * c * sizeof(double)) == 0);
    CHECK(std::memcmp(y.data(), y.data() + 2 * v * c, v * c * sizeof(double)) == 0);
}

TEST_CASE("window attention rejects bad head counts") {
    Array x = testutil::random_array({1, 4, 6}, 407);
    AttentionParams p = random_attention(6, 4, {1, 2, 2}, 408);
    CHECK_THROWS_AS(window_msa(x, p, nullptr, 1, nullptr), contract_error);
}

TEST_CASE("block with zeroed output projections is the identity") {
    SwinConfig cfg;
    cfg.window_size = {2, 4, 4};
    Array x = testutil::random_array({1, 3, 5, 5, 16}, 501);  // forces padding too
    for (int shifted = 0; shifted < 2; ++shifted) {
        BlockParams p = random_dense_block(16, 2, cfg.window_size, cfg.mlp_ratio, 502);
        for (double& w : p.attn.out_w.vec()) w = 0.0;
        for (double& w : p.attn.out_b.vec()) w = 0.0;
        for (double& w : p.fc2_w.vec()) w = 0.0;
        for (double& w : p.fc2_b.vec()) w = 0.0;
        Array y = swin_block(x, p, cfg, 0, shifted != 0, nullptr);
        REQUIRE(y.shape() == x.shape());
        CHECK(std::memcmp(y.data(), x.data(), x.numel() * sizeof(double)) == 0);
    }
}

TEST_CASE("shifted block on window-sized dims matches the band oracle") {
    SwinConfig cfg;
    cfg.window_size = {2, 4, 4};
    const size_t c = 16;
    const Dims3 dims = cfg.window_size;
    Array x = testutil::random_array({1, dims.t, dims.h, dims.w, c}, 503);
    BlockParams p = random_dense_block(c, 2, cfg.window_size, cfg.mlp_ratio, 504);

    Array got = swin_block(x, p, cfg, 0, true, nullptr);

    // oracle block: attention replaced by the band-wise reference, the rest
    // assembled from already-tested ops
    Array ln1 = layer_norm(x, p.norm1_g, p.norm1_b);
    std::vector<double> flat(ln1.data(), ln1.data() + ln1.numel());
    std::vector<double> attn =
        oracle::band_attention(flat, dims, c, cfg.window_size, cfg.shift_size(), p.attn);
    Array res = add(x, Array::from_data(x.shape(), attn));
    Array z = layer_norm(res, p.norm2_g, p.norm2_b);
    z = linear(z, p.fc1_w, p.fc1_b);
    z = gelu(z);
    z = linear(z, p.fc2_w, p.fc2_b);
    Array want = add(res, z);

    double worst = 0.0;
    for (size_t i = 0; i < want.numel(); ++i) {
        worst = std::max(worst, std::abs(got.data()[i] - want.data()[i]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("gradients flow through a full shifted dense block") {
    SwinConfig cfg;
    cfg.window_size = {2, 4, 4};
    const size_t c = 8;
    Array x = testutil::random_array({1, 2, 4, 4, c}, 505);
    BlockParams p = random_dense_block(c, 2, cfg.window_size, cfg.mlp_ratio, 506);
    auto loss = [&]() {
        return testutil::weighted_sum(swin_block(x, p, cfg, 0, true, nullptr));
    };
    testutil::check_gradients(loss,
                              {x, p.attn.q_w, p.attn.k_b, p.attn.v_w, p.attn.out_w,
                               p.attn.relpos_table, p.norm1_g, p.norm2_b, p.fc1_w, p.fc2_w},
                              24);
}

TEST_CASE("patch merging halves space and keeps time") {
    Array x = testutil::random_array({1, 8, 4, 4, 16}, 507);
    MergeParams p;
    p.norm_g = testutil::random_array({64}, 508, 0.8, 1.2);
    p.norm_b = testutil::random_array({64}, 509, -0.1, 0.1);
    p.reduce_w = testutil::random_array({64, 32}, 510, -0.2, 0.2);
    Array y = patch_merging(x, p);
    REQUIRE(y.shape() == std::vector<size_t>{1, 8, 2, 2, 32});
    CHECK(x.numel() / 2 == y.numel());  // tokens /4, channels x2

    Array odd = testutil::random_array({1, 2, 3, 4, 4}, 511);
    CHECK_THROWS_AS(patch_merging(odd, p), contract_error);
}

TEST_CASE("patch merging concatenates 2x2 neighbors in order") {
    // C=1 canvas, identity-ish reduction: pick out normalized entries 0 and 3,
    // which correspond to neighbors (0,0) and (1,1)
    Array x = Array::from_data({1, 1, 2, 2, 1}, {1.0, 2.0, 3.0, 4.0});
    MergeParams p;
    p.norm_g = Array::from_data({4}, {1, 1, 1, 1});
    p.norm_b = Array::zeros({4});
    p.reduce_w = Array::zeros({4, 2});
    p.reduce_w.data()[0 * 2 + 0] = 1.0;  // out0 = ln(g)[0]
    p.reduce_w.data()[3 * 2 + 1] = 1.0;  // out1 = ln(g)[3]
    Array y = patch_merging(x, p);
    REQUIRE(y.shape() == std::vector<size_t>{1, 1, 1, 1, 2});
    // group vector is (1,2,3,4): mean 2.5, population var 1.25
    const double inv = 1.0 / std::sqrt(1.25 + 1e-5);
    CHECK(y.data()[0] == doctest::Approx((1.0 - 2.5) * inv).epsilon(1e-12));
    CHECK(y.data()[1] == doctest::Approx((4.0 - 2.5) * inv).epsilon(1e-12));
}

TEST_CASE("patch embedding shapes and identity projection") {
    SwinConfig cfg;
    Array video = testutil::random_array({1, 16, 16, 16, 1}, 512);
    Array w = Array::zeros({32, 16});
    for (size_t i = 0; i < 16; ++i) w.data()[i * 16 + i] = 1.0;
    Array b = Array::zeros({16});
    Array y = patch_embed(video, cfg, w, b);
    REQUIRE(y.shape() == std::vector<size_t>{1, 8, 4, 4, 16});

    // with an identity-extension weight, each token holds the first 16 values
    // of its flattened (dt, dh, dw, c) patch: the dt=0 spatial plane
    auto vid = [&](size_t t, size_t h, size_t w2) {
        return video.data()[(t * 16 + h) * 16 + w2];
    };
    for (size_t t = 0; t < 8; ++t) {
        for (size_t h = 0; h < 4; ++h) {
            for (size_t w2 = 0; w2 < 4; ++w2) {
                const double* tokp = y.data() + ((t * 4 + h) * 4 + w2) * 16;
                for (size_t j = 0; j < 16; ++j) {
                    CHECK(tokp[j] == vid(2 * t, 4 * h + j / 4, 4 * w2 + j % 4));
                }
            }
        }
    }

    // all-zero video: every token equals the bias
    Array zeros = Array::zeros({1, 4, 8, 8, 1});
    Array bias = testutil::random_array({16}, 513);
    Array t2 = patch_embed(zeros, cfg, testutil::random_array({32, 16}, 514), bias);
    for (size_t tok = 0; tok < t2.numel() / 16; ++tok) {
        for (size_t j = 0; j < 16; ++j) CHECK(t2.data()[tok * 16 + j] == bias.data()[j]);
    }
}

TEST_CASE("backbone forward hits the documented desk shapes") {
    SwinConfig cfg;
    SwinBackbone net(cfg, 2024);
    Array video = testutil::random_array({1, 16, 16, 16, 1}, 515);
    FeatureMap out = net.forward(video);
    REQUIRE(out.tensor.shape() == std::vector<size_t>{1, 8, 2, 2, 32});
    CHECK(out.dims().t == 8);  // time never shrinks after embedding
    for (size_t i = 0; i < out.tensor.numel(); ++i) CHECK(std::isfinite(out.tensor.data()[i]));

    CHECK(net.counters().score > 0);
    CHECK(net.counters().aggregate > 0);
    CHECK(net.counters().offsets == 0);

    // determinism across instances and calls, counters included
    SwinBackbone twin(cfg, 2024);
    FeatureMap again = twin.forward(video);
    CHECK(std::memcmp(again.tensor.data(), out.tensor.data(),
                      out.tensor.numel() * sizeof(double)) == 0);
    const auto first_score = net.counters().score;
    FeatureMap rerun = net.forward(video);
    CHECK(net.counters().score == first_score);
    CHECK(std::memcmp(rerun.tensor.data(), out.tensor.data(),
                      out.tensor.numel() * sizeof(double)) == 0);
}

TEST_CASE("deformable backbone runs the same geometry") {
    SwinConfig cfg;
    cfg.attention_kind = AttentionKind::deformable;
    SwinBackbone net(cfg, 77);
    Array video = testutil::random_array({1, 16, 16, 16, 1}, 516);
    FeatureMap out = net.forward(video);
    REQUIRE(out.tensor.shape() == std::vector<size_t>{1, 8, 2, 2, 32});
    for (size_t i = 0; i < out.tensor.numel(); ++i) CHECK(std::isfinite(out.tensor.data()[i]));
    CHECK(net.counters().offsets > 0);
    CHECK(net.counters().score > 0);
    CHECK(net.counters().aggregate > 0);
}

TEST_CASE("backbone parameters are registered under stable names") {
    SwinConfig cfg;
    SwinBackbone net(cfg, 1);
    for (const char* name :
         {"embed.weight", "stage0.block0.attn.q.weight", "stage0.block1.norm2.beta",
          "stage0.merge.reduce.weight", "stage1.block1.mlp.fc2.bias",
          "stage0.block0.attn.relpos.table"}) {
        CHECK(net.params().find(name).valid());
    }
    CHECK_THROWS_AS(net.params().find("stage9.block0.attn.q.weight"), contract_error);
    for (const auto& e : net.params().entries()) {
        CHECK(e.second.requires_grad());
    }
    CHECK_THROWS_AS(net.params().add("embed.weight", {1}), contract_error);

    SwinConfig dcfg;
    dcfg.attention_kind = AttentionKind::deformable;
    SwinBackbone dnet(dcfg, 1);
    CHECK(dnet.params().find("stage1.block0.attn.offsets.weight").valid());
    CHECK(dnet.params().find("stage1.block0.attn.weights.bias").valid());
}

TEST_CASE("end-to-end backbone gradient check") {
    SwinConfig cfg;
    cfg.patch_size = {1, 2, 2};
    cfg.embed_dim = 4;
    cfg.depths = {1, 1};
    cfg.num_heads = {1, 2};
    cfg.window_size = {1, 2, 2};
    cfg.mlp_ratio = 2;
    SwinBackbone net(cfg, 99);
    Array video = testutil::random_array({1, 2, 4, 4, 1}, 517);
    auto loss = [&]() { return testutil::weighted_sum(net.forward(video).tensor); };
    std::vector<Array> probes{video, net.params().find("embed.weight"),
                              net.params().find("stage0.block0.attn.q.weight"),
                              net.params().find("stage0.merge.reduce.weight"),
                              net.params().find("stage1.block0.mlp.fc1.weight"),
                              net.params().find("stage1.block0.norm1.gamma")};
    testutil::check_gradients(loss, probes, 20);
}

TEST_CASE("config validation rejects bad setups") {
    SwinConfig ok;
    ok.validate();

    SwinConfig bad = ok;
    bad.num_heads = {3, 4};  // 16 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), contract_error);

    bad = ok;
    bad.depths = {2};
    CHECK_THROWS_AS(bad.validate(), contract_error);

    bad = ok;
    bad.window_size = {0, 4, 4};
    CHECK_THROWS_AS(bad.validate(), contract_error);
}
