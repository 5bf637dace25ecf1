#include "swinvid/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "swinvid/adamw.hpp"
#include "swinvid/checkpoint.hpp"
#include "swinvid/errors.hpp"
#include "swinvid/ops.hpp"
#include "swinvid/parallel.hpp"
#include "swinvid/rng.hpp"

namespace swinvid {

void TrainConfig::validate() const {
    if (epochs == 0) throw contract_error("train: epochs must be positive");
    if (!(lr > 0.0)) throw contract_error("train: learning rate must be positive");
    if (batch_size == 0) throw contract_error("train: batch_size must be positive");
    if (!(val_fraction > 0.0) || val_fraction >= 1.0) {
        throw contract_error("train: val_fraction must lie in (0, 1)");
    }
}

ClipExample make_example(const Array& video, const ClipAnnotation& ann, TaskKind task,
                         const SamplerConfig& sampler) {
    ann.validate();
    SampledClip s = sample_clip(video, sampler, ann.pnr_frame);
    ClipExample ex;
    ex.clip_id = ann.clip_id;
    ex.frames = s.frames;
    ex.duration_frames = ann.duration_frames;
    ex.fps = ann.fps;
    ex.state_change = ann.state_change;
    ex.pnr_frame = ann.pnr_frame;
    if (task == TaskKind::oscc) {
        ex.label = ann.state_change ? 1 : 0;
        ex.has_label = true;
    } else if (s.encoded_pnr) {
        ex.label = static_cast<int>(*s.encoded_pnr);
        ex.has_label = true;
    }
    return ex;
}

std::vector<ClipExample> load_examples(const std::string& data_dir, TaskKind task,
                                       const SamplerConfig& sampler) {
    const auto annotations = read_annotations(data_dir + "/annotations.jsonl");
    std::vector<ClipExample> out(annotations.size());
    parallel_for(annotations.size(), [&](size_t i) {
        const ClipAnnotation& ann = annotations[i];
        Array video = read_clip_binary(data_dir + "/clips/" + ann.clip_id + ".swc");
        if (video.rank() != 4 || video.shape()[0] != ann.duration_frames) {
            throw validation_error("clip '" + ann.clip_id + "': tensor shape " +
                                   video.shape_str() + " does not match its annotation");
        }
        out[i] = make_example(video, ann, task, sampler);
    });
    return out;
}

namespace {

Array stack_frames(const std::vector<ClipExample>& examples, const std::vector<size_t>& idx,
                   size_t begin, size_t count) {
    const Array& first = examples[idx[begin]].frames;
    std::vector<size_t> shape{count, first.shape()[0], first.shape()[1], first.shape()[2],
                              first.shape()[3]};
    Array batch = Array::zeros(shape);
    const size_t row = first.numel();
    for (size_t b = 0; b < count; ++b) {
        const Array& f = examples[idx[begin + b]].frames;
        if (f.shape() != first.shape()) {
            throw validation_error("clip '" + examples[idx[begin + b]].clip_id +
                                   "': frame shape " + f.shape_str() +
                                   " differs from the rest of the dataset");
        }
        std::memcpy(batch.data() + b * row, f.data(), row * sizeof(double));
    }
    return batch;
}

void fisher_yates(std::vector<size_t>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.next() % i);
        std::swap(v[i - 1], v[j]);
    }
}

struct ValScore {
    double metric = 0.0;  // accuracy (oscc) or mean abs error seconds (pnr)
    bool better_than(double other, TaskKind task) const {
        return task == TaskKind::oscc ? metric > other : metric < other;
    }
};

ValScore validate_split(TaskModel& model, const std::vector<ClipExample>& examples,
                        const std::vector<size_t>& idx, size_t batch_size) {
    double correct = 0.0, err_sum = 0.0;
    size_t n = 0;
    for (size_t begin = 0; begin < idx.size(); begin += batch_size) {
        const size_t count = std::min(batch_size, idx.size() - begin);
        Array logits = model.logits(stack_frames(examples, idx, begin, count));
        const size_t width = logits.shape()[1];
        for (size_t b = 0; b < count; ++b) {
            const ClipExample& ex = examples[idx[begin + b]];
            const size_t pick = argmax_lowest(logits.data() + b * width, width);
            if (model.task() == TaskKind::oscc) {
                correct += static_cast<int>(pick) == ex.label ? 1.0 : 0.0;
            } else {
                const size_t pred = decode_pnr(pick, ex.duration_frames,
                                               model.sampler().input_size);
                err_sum += temporal_error_seconds(static_cast<double>(pred),
                                                  static_cast<double>(*ex.pnr_frame), ex.fps);
            }
            ++n;
        }
    }
    ValScore s;
    s.metric = model.task() == TaskKind::oscc ? correct / static_cast<double>(n)
                                              : err_sum / static_cast<double>(n);
    return s;
}

}  // namespace

void split_examples(const std::vector<ClipExample>& all, double val_fraction, uint64_t seed,
                    std::vector<size_t>& train_idx, std::vector<size_t>& val_idx) {
    std::vector<size_t> labeled;
    for (size_t i = 0; i < all.size(); ++i) {
        if (all[i].has_label) labeled.push_back(i);
    }
    if (labeled.size() < 2) {
        throw contract_error("train: need at least 2 labeled clips, have " +
                             std::to_string(labeled.size()));
    }
    SplitMix64 rng(mix_streams(seed, 0x5A17));
    fisher_yates(labeled, rng);
    size_t val_n = static_cast<size_t>(
        std::round(val_fraction * static_cast<double>(labeled.size())));
    val_n = std::max<size_t>(1, std::min(val_n, labeled.size() - 1));
    val_idx.assign(labeled.begin(), labeled.begin() + val_n);
    train_idx.assign(labeled.begin() + val_n, labeled.end());
}

TrainResult train_model(TaskModel& model, const std::vector<ClipExample>& examples,
                        const TrainConfig& cfg, const std::string& checkpoint_path,
                        std::ostream& log) {
    cfg.validate();
    std::vector<size_t> train_idx, val_idx;
    split_examples(examples, cfg.val_fraction, cfg.seed, train_idx, val_idx);

    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.lr;
    AdamW opt(model.trainable(), opt_cfg);

    const char* metric_name = model.task() == TaskKind::oscc ? "val_acc" : "val_err_s";
    TrainResult result;
    double best = model.task() == TaskKind::oscc ? -1.0 : std::numeric_limits<double>::max();

    auto emit = [&](const std::string& line) {
        log << line << "\n";
        log.flush();
        result.log_lines.push_back(line);
    };

    char buf[160];
    std::snprintf(buf, sizeof buf, "train clips %zu val clips %zu params %zu", train_idx.size(),
                  val_idx.size(), model.trainable().size());
    emit(buf);

    for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> order = train_idx;
        SplitMix64 shuffle_rng(mix_streams(cfg.seed, 0xE000 + epoch));
        fisher_yates(order, shuffle_rng);

        double loss_sum = 0.0;
        for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const size_t count = std::min(cfg.batch_size, order.size() - begin);
            Array batch = stack_frames(examples, order, begin, count);
            std::vector<int> targets(count);
            for (size_t b = 0; b < count; ++b) targets[b] = examples[order[begin + b]].label;

            Tape tape;
            Array loss = cross_entropy_mean(model.logits(batch), targets);
            loss_sum += loss.item() * static_cast<double>(count);
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
        }
        result.final_loss = loss_sum / static_cast<double>(order.size());
        result.epochs_run = epoch;
        result.epoch_losses.push_back(result.final_loss);

        const ValScore score = validate_split(model, examples, val_idx, cfg.batch_size);
        result.epoch_metrics.push_back(score.metric);
        std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f %s %.6f", epoch, result.final_loss,
                      metric_name, score.metric);
        emit(buf);

        if (score.better_than(best, model.task())) {
            best = score.metric;
            result.best_epoch = epoch;
            result.best_metric = best;
            save_checkpoint(checkpoint_path, model.entries());
        }
        if (cfg.metric_target) {
            const bool reached = model.task() == TaskKind::oscc
                                     ? score.metric >= *cfg.metric_target
                                     : score.metric <= *cfg.metric_target;
            if (reached) {
                std::snprintf(buf, sizeof buf, "target %s %.6f reached at epoch %zu",
                              metric_name, *cfg.metric_target, epoch);
                emit(buf);
                break;
            }
        }
    }
    std::snprintf(buf, sizeof buf, "best %s %.6f at epoch %zu", metric_name,
                  result.best_metric, result.best_epoch);
    emit(buf);
    return result;
}

EvalReport evaluate_model(TaskModel& model, const std::vector<ClipExample>& examples,
                          size_t batch_size) {
    if (batch_size == 0) throw contract_error("eval: batch_size must be positive");
    EvalReport report;
    report.task = model.task() == TaskKind::oscc ? "oscc" : "pnr";

    std::vector<size_t> idx;
    for (size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].has_label) {
            idx.push_back(i);
        } else {
            ++report.skipped;
        }
    }
    if (idx.empty()) throw contract_error("eval: no clips carry usable ground truth");

    for (size_t begin = 0; begin < idx.size(); begin += batch_size) {
        const size_t count = std::min(batch_size, idx.size() - begin);
        Array logits = model.logits(stack_frames(examples, idx, begin, count));
        const size_t width = logits.shape()[1];
        for (size_t b = 0; b < count; ++b) {
            const ClipExample& ex = examples[idx[begin + b]];
            const size_t pick = argmax_lowest(logits.data() + b * width, width);
            EvalRecord rec;
            rec.clip_id = ex.clip_id;
            if (model.task() == TaskKind::oscc) {
                rec.prediction = static_cast<double>(pick);
                rec.ground_truth = static_cast<double>(ex.label);
                rec.error = rec.prediction == rec.ground_truth ? 0.0 : 1.0;
            } else {
                const size_t pred = decode_pnr(pick, ex.duration_frames,
                                               model.sampler().input_size);
                rec.prediction = static_cast<double>(pred);
                rec.ground_truth = static_cast<double>(*ex.pnr_frame);
                rec.error = temporal_error_seconds(rec.prediction, rec.ground_truth, ex.fps);
            }
            report.per_clip.push_back(std::move(rec));
        }
    }

    double sum = 0.0;
    size_t correct = 0;
    for (const auto& r : report.per_clip) {
        sum += r.error;
        if (r.prediction == r.ground_truth) ++correct;
    }
    if (model.task() == TaskKind::oscc) {
        report.accuracy =
            static_cast<double>(correct) / static_cast<double>(report.per_clip.size());
    } else {
        report.mean_abs_error_seconds = sum / static_cast<double>(report.per_clip.size());
    }
    report.check();
    return report;
}

EvalReport evaluate_baseline(const std::vector<ClipExample>& examples,
                             const PnrBaselineConfig& cfg) {
    cfg.validate();
    EvalReport report;
    report.task = "pnr";
    for (const auto& ex : examples) {
        if (!ex.pnr_frame) {
            ++report.skipped;
            continue;
        }
        EvalRecord rec;
        rec.clip_id = ex.clip_id;
        rec.prediction = static_cast<double>(baseline_fraction(ex.duration_frames, cfg));
        rec.ground_truth = static_cast<double>(*ex.pnr_frame);
        rec.error = temporal_error_seconds(rec.prediction, rec.ground_truth, ex.fps);
        report.per_clip.push_back(std::move(rec));
    }
    if (report.per_clip.empty()) {
        throw contract_error("eval: no clips carry usable ground truth");
    }
    double sum = 0.0;
    for (const auto& r : report.per_clip) sum += r.error;
    report.mean_abs_error_seconds = sum / static_cast<double>(report.per_clip.size());
    report.check();
    return report;
}

}  // namespace swinvid
