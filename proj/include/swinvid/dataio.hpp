#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swinvid/array.hpp"

// Synthetic clip generation with planted state changes, annotation and clip
// tensor file formats, evaluation reports, and the distribution analyses
// (normalized-PNR histogram, error histogram).

namespace swinvid {

struct ClipAnnotation {
    std::string clip_id;
    size_t duration_frames = 0;
    double fps = 30.0;
    bool state_change = false;
    std::optional<size_t> pnr_frame;

    void validate() const;  // throws validation_error naming the clip_id
};

enum class PnrDistribution { uniform, triangular, fixed };

struct SynthSpec {
    size_t num_clips = 512;
    double positive_ratio = 0.5;
    size_t duration_frames = 240;  // 8 s at 30 fps
    PnrDistribution pnr_distribution = PnrDistribution::uniform;
    double pnr_param = 0.45;  // mode for triangular, the value itself for fixed
    size_t height = 16;
    size_t width = 16;
    double noise_sigma = 0.1;
    double fps = 30.0;
    uint64_t seed = 0;

    void validate() const;
};

// pure function of (spec, index): video (duration, H, W, 1) plus annotation
std::pair<Array, ClipAnnotation> generate_clip(const SynthSpec& spec, size_t index);

// the annotation half only (same draws, no pixel synthesis)
ClipAnnotation generate_annotation(const SynthSpec& spec, size_t index);
std::vector<ClipAnnotation> generate_annotations(const SynthSpec& spec);

struct Histogram {
    std::vector<double> bin_edges;  // counts.size() + 1 sorted edges
    std::vector<size_t> counts;
    double mode_midpoint = 0.0;  // midpoint of the fullest bin (ties: lowest)
};

// histogram of pnr_frame / duration_frames over annotations that carry a PNR
Histogram frequency_analysis(const std::vector<ClipAnnotation>& annotations,
                             double bin_width = 0.05);

struct EvalRecord {
    std::string clip_id;
    double prediction = 0.0;
    double ground_truth = 0.0;
    double error = 0.0;  // seconds for pnr, 0/1 mistake flag for oscc
};

struct EvalReport {
    std::string task;  // "oscc" | "pnr"
    std::optional<double> accuracy;
    std::optional<double> mean_abs_error_seconds;
    std::vector<EvalRecord> per_clip;
    size_t skipped = 0;  // clips without usable ground truth

    // recompute aggregates from per_clip and compare within 1e-12
    void check() const;
};

// histogram of per-clip absolute errors (pnr reports only)
Histogram error_distribution(const EvalReport& report, double bin_width_seconds);

// line-delimited records; unknown fields are ignored on read
std::vector<ClipAnnotation> read_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<ClipAnnotation>& list);

// flat binary clip tensor: "SWC1", rank, dims (u32 LE), f32 LE values;
// reading upcasts to the 64-bit Array
Array read_clip_binary(const std::string& path);
void write_clip_binary(const std::string& path, const Array& video);

// two-column plain text: bin_left count
void write_histogram(const std::string& path, const Histogram& h);

void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

// map challenge-style annotation fields (clip uid, parent-video frame spans,
// parent-relative PNR) onto ClipAnnotation records
std::vector<ClipAnnotation> import_challenge_annotations(const std::string& path);

}  // namespace swinvid
