#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "swinvid/array.hpp"
#include "swinvid/ops.hpp"

// Video transformer backbone: 3D patch embedding, window / shifted-window
// multi-head self-attention over (t, h, w) sub-volumes with relative position
// bias, MLP blocks, and spatial-only 2x2 patch merging. The temporal
// resolution is never reduced after patch embedding.

namespace swinvid {

struct Dims3 {
    size_t t = 1, h = 1, w = 1;

    size_t volume() const { return t * h * w; }
    bool operator==(const Dims3& o) const { return t == o.t && h == o.h && w == o.w; }
};

enum class AttentionKind { dense_window, deformable };

struct SwinConfig {
    Dims3 patch_size{2, 4, 4};
    size_t in_channels = 1;
    size_t embed_dim = 16;
    std::vector<size_t> depths{2, 2};
    std::vector<size_t> num_heads{2, 4};
    Dims3 window_size{2, 4, 4};
    size_t mlp_ratio = 4;
    AttentionKind attention_kind = AttentionKind::dense_window;
    // deformable-attention knobs (ignored for dense windows)
    size_t n_points = 4;
    double offset_scale = 1.0;

    // shift used by every other block: floor(window/2) per axis
    Dims3 shift_size() const {
        return {window_size.t / 2, window_size.h / 2, window_size.w / 2};
    }
    size_t stage_channels(size_t stage) const { return embed_dim << stage; }
    void validate() const;  // throws contract_error on violated invariants
};

// a feature map is a dense (batch, T, H, W, C) tensor
struct FeatureMap {
    Array tensor;

    size_t batch() const { return tensor.shape()[0]; }
    Dims3 dims() const {
        return {tensor.shape()[1], tensor.shape()[2], tensor.shape()[3]};
    }
    size_t channels() const { return tensor.shape()[4]; }
};

// named parameter registry; registration order is the checkpoint order
class ParamStore {
  public:
    Array add(const std::string& name, std::vector<size_t> shape);
    const std::vector<std::pair<std::string, Array>>& entries() const { return entries_; }
    std::vector<Array> all() const;
    Array find(const std::string& name) const;  // throws contract_error when absent

  private:
    std::vector<std::pair<std::string, Array>> entries_;
};

// exact multiply-add tallies for one attention call, split by site
struct MacCounters {
    unsigned long long score = 0;      // qk scores / sample-weight logits
    unsigned long long offsets = 0;    // offset prediction (deformable only)
    unsigned long long aggregate = 0;  // value mixing / interpolation

    unsigned long long total() const { return score + offsets + aggregate; }
    void reset() { score = offsets = aggregate = 0; }
};

// ---- geometry ----------------------------------------------------------------

// (B, T, H, W, C) -> (B*nW, window_volume, C); dims must divide by window
Array window_partition(const Array& x, Dims3 window);
// exact inverse of window_partition
Array window_reverse(const Array& windows, size_t batch, Dims3 dims, Dims3 window);
// rolled[..., r, ...] = x[..., (r + shift) mod L, ...] on each of T, H, W
Array cyclic_shift(const Array& x, Dims3 shifts);
Array cyclic_unshift(const Array& x, Dims3 shifts);
// right-pad T,H,W with zeros up to multiples; no-op when already aligned
Array pad_to_multiple(const Array& x, Dims3 multiple, Dims3* padded);
Array crop_to(const Array& x, Dims3 dims);

// ---- attention ingredients ----------------------------------------------------

// relative-position lookup: index map (V*V entries into the bias table) and
// the table row count (2wt-1)(2wh-1)(2ww-1)
std::shared_ptr<const std::vector<int32_t>> relpos_index(Dims3 window);
size_t relpos_rows(Dims3 window);

// shifted-window attention mask over a divisible canvas: entry 0 where both
// tokens come from the same pre-shift band on every axis, -1e9 otherwise
std::shared_ptr<std::vector<double>> attention_mask(Dims3 dims, Dims3 window, Dims3 shifts);
// same, over a padded canvas: tokens whose pre-shift position lies outside
// `orig` are masked out entirely
std::shared_ptr<std::vector<double>> attention_mask_padded(Dims3 padded, Dims3 orig,
                                                           Dims3 window, Dims3 shifts);

struct AttentionParams {
    Array q_w, q_b, k_w, k_b, v_w, v_b;
    Array out_w, out_b;
    Array relpos_table;  // (relpos_rows, heads)
    std::shared_ptr<const std::vector<int32_t>> relpos_idx;
    size_t heads = 1;
};

// dense multi-head attention over (G, V, C) windows. mask may be null; when
// given it holds num_windows per-window (V, V) additive masks cycled over G.
// counters may be null.
Array window_msa(const Array& windows, const AttentionParams& p,
                 std::shared_ptr<const std::vector<double>> mask, size_t num_windows,
                 MacCounters* counters);

// ---- blocks -------------------------------------------------------------------

struct DeformParams;  // defined in deform.hpp

struct BlockParams {
    Array norm1_g, norm1_b;
    AttentionParams attn;                  // dense path
    std::shared_ptr<DeformParams> deform;  // deformable path
    Array norm2_g, norm2_b;
    Array fc1_w, fc1_b, fc2_w, fc2_b;
};

// pre-norm residual block: x + attn(LN(x)) then + MLP(LN(.)). When shifted,
// the canvas is rolled by floor(window/2) before partitioning and the band
// mask keeps attention within pre-shift regions.
Array swin_block(const Array& x, const BlockParams& p, const SwinConfig& cfg, size_t stage,
                 bool shifted, MacCounters* counters);

struct MergeParams {
    Array norm_g, norm_b;
    Array reduce_w;  // (4C, 2C), no bias
};

// concatenate 2x2 spatial neighbors, layer-norm, linear 4C -> 2C; T unchanged
Array patch_merging(const Array& x, const MergeParams& p);

Array patch_embed(const Array& video, const SwinConfig& cfg, const Array& w, const Array& b);

// ---- full backbone ------------------------------------------------------------

struct StageParams {
    std::vector<BlockParams> blocks;
    bool has_merge = false;
    MergeParams merge;
};

class SwinBackbone {
  public:
    SwinBackbone(const SwinConfig& cfg, uint64_t seed);

    // (B, T, H, W, Cin) -> final feature map; counters accumulate attention
    // multiply-adds for this call (reset on entry)
    FeatureMap forward(const Array& video);

    const SwinConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const MacCounters& counters() const { return counters_; }
    StageParams& stage(size_t i) { return stages_[i]; }

  private:
    SwinConfig cfg_;
    ParamStore params_;
    Array embed_w_, embed_b_;
    std::vector<StageParams> stages_;
    MacCounters counters_;
};

}  // namespace swinvid
