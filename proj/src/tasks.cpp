#include "swinvid/tasks.hpp"

#include <cmath>
#include <cstring>

#include "swinvid/errors.hpp"
#include "swinvid/ops.hpp"
#include "swinvid/rng.hpp"

namespace swinvid {

void SamplerConfig::validate() const {
    if (input_size < 2) throw contract_error("sampler: input_size must be >= 2");
    if (!(fps > 0.0)) throw contract_error("sampler: fps must be positive");
}

void PnrBaselineConfig::validate() const {
    if (!(fraction > 0.0) || !(fraction < 1.0)) {
        throw contract_error("baseline: fraction must lie strictly between 0 and 1");
    }
}

double sampling_rate(size_t duration_frames, size_t input_size) {
    return static_cast<double>(duration_frames) / static_cast<double>(input_size);
}

std::vector<size_t> uniform_sample_indices(size_t duration_frames, size_t input_size) {
    if (duration_frames < input_size) {
        throw contract_error("uniform_sample_indices: clip of " +
                             std::to_string(duration_frames) + " frames is shorter than the " +
                             std::to_string(input_size) + "-frame input size");
    }
    const double rate = sampling_rate(duration_frames, input_size);
    std::vector<size_t> idx(input_size);
    for (size_t k = 0; k < input_size; ++k) {
        idx[k] = static_cast<size_t>(std::floor((static_cast<double>(k) + 0.5) * rate));
    }
    return idx;
}

size_t encode_pnr(size_t frame, size_t duration_frames, size_t input_size) {
    if (frame >= duration_frames) {
        throw contract_error("encode_pnr: frame " + std::to_string(frame) +
                             " outside clip of " + std::to_string(duration_frames) + " frames");
    }
    const double rate = sampling_rate(duration_frames, input_size);
    const double bin = std::floor(static_cast<double>(frame) / rate);
    if (bin <= 0.0) return 0;
    const size_t b = static_cast<size_t>(bin);
    return b >= input_size ? input_size - 1 : b;
}

size_t decode_pnr(size_t bin, size_t duration_frames, size_t input_size) {
    if (bin >= input_size) {
        throw contract_error("decode_pnr: bin " + std::to_string(bin) + " outside [0, " +
                             std::to_string(input_size) + ")");
    }
    const double rate = sampling_rate(duration_frames, input_size);
    return static_cast<size_t>(std::floor((static_cast<double>(bin) + 0.5) * rate));
}

SampledClip sample_clip(const Array& full_clip, const SamplerConfig& cfg,
                        std::optional<size_t> pnr_frame) {
    if (full_clip.rank() != 4) {
        throw contract_error("sample_clip: expected a (frames, h, w, c) clip, got " +
                             full_clip.shape_str());
    }
    cfg.validate();
    const size_t duration = full_clip.shape()[0];
    const size_t row = full_clip.numel() / duration;
    const auto idx = uniform_sample_indices(duration, cfg.input_size);

    SampledClip out;
    out.duration_frames = duration;
    out.rate = sampling_rate(duration, cfg.input_size);
    out.frames = Array::zeros({cfg.input_size, full_clip.shape()[1], full_clip.shape()[2],
                               full_clip.shape()[3]});
    for (size_t k = 0; k < cfg.input_size; ++k) {
        std::memcpy(out.frames.data() + k * row, full_clip.data() + idx[k] * row,
                    row * sizeof(double));
    }
    if (pnr_frame) {
        out.encoded_pnr = encode_pnr(*pnr_frame, duration, cfg.input_size);
    }
    return out;
}

size_t baseline_fraction(size_t duration_frames, const PnrBaselineConfig& cfg) {
    cfg.validate();
    if (duration_frames == 0) throw contract_error("baseline: empty clip");
    const double raw = std::round(cfg.fraction * static_cast<double>(duration_frames));
    if (raw <= 0.0) return 0;
    const size_t frame = static_cast<size_t>(raw);
    return frame >= duration_frames ? duration_frames - 1 : frame;
}

size_t baseline_center(size_t duration_frames) {
    PnrBaselineConfig cfg;
    cfg.fraction = 0.5;
    return baseline_fraction(duration_frames, cfg);
}

double temporal_error_seconds(double pred_frame, double gt_frame, double fps) {
    if (!(fps > 0.0)) throw contract_error("temporal_error_seconds: fps must be positive");
    return std::abs(pred_frame - gt_frame) / fps;
}

size_t argmax_lowest(const double* values, size_t n) {
    if (n == 0) throw contract_error("argmax over an empty range");
    size_t best = 0;
    for (size_t i = 1; i < n; ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

Array oscc_head(const FeatureMap& features, const Array& w, const Array& b) {
    const Array& x = features.tensor;
    const size_t batch = x.shape()[0], c = x.shape()[4];
    Array pooled = mean_middle(reshape(x, {batch, x.numel() / (batch * c), c}));
    return linear(pooled, w, b);
}

Array pnr_head(const FeatureMap& features, const Array& w, const Array& b, size_t input_size) {
    const Array& x = features.tensor;
    const size_t batch = x.shape()[0], t = x.shape()[1], c = x.shape()[4];
    const size_t spatial = x.shape()[2] * x.shape()[3];
    if (t % input_size != 0 && input_size % t != 0) {
        throw contract_error("pnr_head: backbone temporal dim " + std::to_string(t) +
                             " incompatible with input size " + std::to_string(input_size));
    }
    Array pooled = mean_middle(reshape(x, {batch * t, spatial, c}));  // (B*T, C)
    Array scores = reshape(linear(pooled, w, b), {batch, t});

    // nearest-repeat resampling onto the input_size grid
    auto idx = std::make_shared<std::vector<int64_t>>(batch * input_size);
    for (size_t bi = 0; bi < batch; ++bi) {
        for (size_t k = 0; k < input_size; ++k) {
            (*idx)[bi * input_size + k] = static_cast<int64_t>(bi * t + k * t / input_size);
        }
    }
    return take(scores, idx, {batch, input_size});
}

TaskModel::TaskModel(TaskKind task, const SwinConfig& model_cfg, const SamplerConfig& sampler,
                     uint64_t seed)
    : task_(task), sampler_(sampler), backbone_(model_cfg, seed) {
    sampler_.validate();
    const size_t c = model_cfg.stage_channels(model_cfg.depths.size() - 1);
    const size_t out = task == TaskKind::oscc ? 2 : 1;
    head_w_ = Array::zeros({c, out}, true);
    head_b_ = Array::zeros({out}, true);
    SplitMix64 rng(mix_streams(seed, 0x4EAD));
    for (double& v : head_w_.vec()) v = rng.trunc_normal(0.02);
}

Array TaskModel::logits(const Array& videos) {
    FeatureMap f = backbone_.forward(videos);
    if (task_ == TaskKind::oscc) return oscc_head(f, head_w_, head_b_);
    return pnr_head(f, head_w_, head_b_, sampler_.input_size);
}

std::vector<std::pair<std::string, Array>> TaskModel::entries() const {
    auto out = backbone_.params().entries();
    out.emplace_back("head.weight", head_w_);
    out.emplace_back("head.bias", head_b_);
    return out;
}

std::vector<Array> TaskModel::trainable() const {
    std::vector<Array> out = backbone_.params().all();
    out.push_back(head_w_);
    out.push_back(head_b_);
    return out;
}

}  // namespace swinvid
