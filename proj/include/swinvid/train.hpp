#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "swinvid/dataio.hpp"
#include "swinvid/tasks.hpp"

// The training loop and the evaluators it shares with the command layer:
// deterministic split/shuffle/batch ordering, AdamW updates, per-epoch
// validation, best-checkpoint saving, and report construction for both the
// trained model and the statistical baselines.

namespace swinvid {

// one clip prepared for training or evaluation
struct ClipExample {
    std::string clip_id;
    Array frames;  // (input_size, H, W, C) sampled frames
    size_t duration_frames = 0;
    double fps = 30.0;
    bool state_change = false;
    std::optional<size_t> pnr_frame;
    int label = 0;           // class for oscc, encoded temporal bin for pnr
    bool has_label = false;  // pnr clips without a state change carry none
};

// read annotations + clip tensors from a dataset directory (annotations.jsonl
// plus clips/<clip_id>.swc) and sample each clip onto the model's frame grid
std::vector<ClipExample> load_examples(const std::string& data_dir, TaskKind task,
                                       const SamplerConfig& sampler);

// build one labeled example from an in-memory clip (used by synthetic runs)
ClipExample make_example(const Array& video, const ClipAnnotation& ann, TaskKind task,
                         const SamplerConfig& sampler);

struct TrainConfig {
    size_t epochs = 30;
    double lr = 3e-4;
    size_t batch_size = 32;
    double val_fraction = 0.2;
    uint64_t seed = 0;
    // stop once the validation metric reaches this value (accuracy >= target
    // for oscc, mean error in seconds <= target for pnr); unset trains the
    // full epoch budget
    std::optional<double> metric_target;

    void validate() const;
};

struct TrainResult {
    size_t epochs_run = 0;
    size_t best_epoch = 0;     // 1-based epoch whose checkpoint was kept
    double best_metric = 0.0;  // accuracy for oscc, mean error seconds for pnr
    double final_loss = 0.0;   // training loss of the last epoch
    std::vector<double> epoch_losses;   // mean training loss per epoch
    std::vector<double> epoch_metrics;  // validation metric per epoch
    std::vector<std::string> log_lines;
};

// deterministic split: shuffled by seed, first part validation, rest training
void split_examples(const std::vector<ClipExample>& all, double val_fraction, uint64_t seed,
                    std::vector<size_t>& train_idx, std::vector<size_t>& val_idx);

// train the model on the labeled examples, validating each epoch and saving
// the best checkpoint to checkpoint_path; log lines go to `log` as they
// happen and into the result
TrainResult train_model(TaskModel& model, const std::vector<ClipExample>& examples,
                        const TrainConfig& cfg, const std::string& checkpoint_path,
                        std::ostream& log);

// run the model over the examples and build the task's report; pnr
// predictions are decoded to full-clip frames, clips without ground truth are
// counted as skipped
EvalReport evaluate_model(TaskModel& model, const std::vector<ClipExample>& examples,
                          size_t batch_size = 32);

// report for a fixed-fraction predictor (pnr only; needs no model)
EvalReport evaluate_baseline(const std::vector<ClipExample>& examples,
                             const PnrBaselineConfig& cfg);

}  // namespace swinvid
