#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swinvid/swin.hpp"

// Task-level machinery: uniform frame sampling with the duration/input_size
// rate, PNR bin encode/decode, the two statistical baselines, task heads on
// top of the backbone, and a combined model whose parameter list (backbone +
// head) is what checkpoints carry.

namespace swinvid {

struct SamplerConfig {
    size_t input_size = 16;  // frames fed to the model
    double fps = 30.0;       // converts frame errors to seconds

    void validate() const;  // throws contract_error on violated invariants
};

// one clip prepared for the model
struct SampledClip {
    Array frames;  // (input_size, H, W, C)
    double rate = 1.0;
    size_t duration_frames = 0;
    std::optional<size_t> encoded_pnr;
};

struct PnrBaselineConfig {
    double fraction = 0.45;

    void validate() const;
};

// duration divided by the model input size
double sampling_rate(size_t duration_frames, size_t input_size);

// index_k = floor((k + 0.5) * rate): the frame at the center of each bin
std::vector<size_t> uniform_sample_indices(size_t duration_frames, size_t input_size);

// frame -> temporal bin: clamp(floor(frame / rate), 0, input_size - 1)
size_t encode_pnr(size_t frame, size_t duration_frames, size_t input_size);

// bin -> representative frame: floor((bin + 0.5) * rate)
size_t decode_pnr(size_t bin, size_t duration_frames, size_t input_size);

// gather input_size frames from a full (duration, H, W, C) clip
SampledClip sample_clip(const Array& full_clip, const SamplerConfig& cfg,
                        std::optional<size_t> pnr_frame);

// predict a fixed fraction of the clip duration (round, clamped into range)
size_t baseline_fraction(size_t duration_frames, const PnrBaselineConfig& cfg);
// predict the middle frame; identical to a 0.5-fraction baseline
size_t baseline_center(size_t duration_frames);

double temporal_error_seconds(double pred_frame, double gt_frame, double fps);

// first index holding the maximum (ties resolve to the lowest index)
size_t argmax_lowest(const double* values, size_t n);

// global average pool over (T, H, W), then linear to 2 logits
Array oscc_head(const FeatureMap& features, const Array& w, const Array& b);

// spatial pool per temporal slot, per-slot linear score, nearest-repeat
// upsample to input_size logits
Array pnr_head(const FeatureMap& features, const Array& w, const Array& b, size_t input_size);

enum class TaskKind { oscc, pnr };

// backbone plus task head behind one named parameter list
class TaskModel {
  public:
    TaskModel(TaskKind task, const SwinConfig& model_cfg, const SamplerConfig& sampler,
              uint64_t seed);

    // (B, input_size, H, W, C) -> (B, 2) for oscc, (B, input_size) for pnr
    Array logits(const Array& videos);

    TaskKind task() const { return task_; }
    const SamplerConfig& sampler() const { return sampler_; }
    SwinBackbone& backbone() { return backbone_; }

    // backbone parameters followed by head.weight / head.bias
    std::vector<std::pair<std::string, Array>> entries() const;
    std::vector<Array> trainable() const;

  private:
    TaskKind task_;
    SamplerConfig sampler_;
    SwinBackbone backbone_;
    Array head_w_, head_b_;
};

}  // namespace swinvid
