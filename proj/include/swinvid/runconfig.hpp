#pragma once

#include <string>

#include "swinvid/dataio.hpp"
#include "swinvid/swin.hpp"
#include "swinvid/tasks.hpp"
#include "swinvid/train.hpp"

// One flat configuration for every subcommand, read from plain-text
// `key = value` files with command-line overrides layered on top. The
// canonical serialization is written next to every run's outputs so a run can
// be reproduced from that file alone.

namespace swinvid {

struct RunConfig {
    TaskKind task = TaskKind::oscc;
    std::string out_dir = "runs/default";
    uint64_t seed = 0;

    SwinConfig model;      // includes attention_kind / n_points / offset_scale
    SamplerConfig sampler;
    SynthSpec synth;
    TrainConfig train;
    bool epochs_set = false;  // unset epochs fall back to the task default

    std::string data_dir;         // dataset directory (train/eval/predict)
    std::string checkpoint_path;  // model weights (eval/predict); empty = <out>/model.ckpt
    std::string report_path;      // eval report to analyze (error histogram)
    std::string baseline;         // "" | "center" | "fraction:F" (model-free eval)

    double fraction_bin_width = 0.05;  // normalized-PNR histogram bins
    double error_bin_seconds = 0.1;    // error-distribution histogram bins

    // task-dependent epoch default: 30 for oscc, 20 for pnr
    size_t resolved_epochs() const;
    void validate() const;
};

// parse one key=value assignment (as found in config files or flag overrides)
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// layer a whole config file onto cfg; '#' starts a comment, blank lines skip
void read_config_file(RunConfig& cfg, const std::string& path);

// canonical serialization: fixed key order, round-trippable values
std::string serialize_config(const RunConfig& cfg);

}  // namespace swinvid
