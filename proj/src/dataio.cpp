#include "swinvid/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "swinvid/errors.hpp"
#include "swinvid/rng.hpp"

namespace swinvid {

using nlohmann::json;

void ClipAnnotation::validate() const {
    auto fail = [&](const std::string& what) {
        throw validation_error("clip '" + clip_id + "': " + what);
    };
    if (clip_id.empty()) throw validation_error("annotation with empty clip_id");
    if (duration_frames == 0) fail("duration_frames must be positive");
    if (!(fps > 0.0)) fail("fps must be positive");
    if (state_change && !pnr_frame) fail("state change without a pnr_frame");
    if (!state_change && pnr_frame) fail("pnr_frame on a clip without a state change");
    if (pnr_frame && *pnr_frame >= duration_frames) {
        fail("pnr_frame " + std::to_string(*pnr_frame) + " outside duration " +
             std::to_string(duration_frames));
    }
}

void SynthSpec::validate() const {
    if (num_clips == 0) throw contract_error("synth: num_clips must be positive");
    if (positive_ratio < 0.0 || positive_ratio > 1.0) {
        throw contract_error("synth: positive_ratio must lie in [0,1]");
    }
    if (duration_frames < 2) throw contract_error("synth: duration_frames must be >= 2");
    if (height < 2 || width < 2) throw contract_error("synth: spatial dims must be >= 2");
    if (noise_sigma < 0.0) throw contract_error("synth: noise_sigma must be nonnegative");
    if (!(fps > 0.0)) throw contract_error("synth: fps must be positive");
    if (pnr_distribution != PnrDistribution::uniform &&
        (pnr_param <= 0.0 || pnr_param >= 1.0)) {
        throw contract_error("synth: pnr parameter must lie strictly between 0 and 1");
    }
}

namespace {

std::string clip_name(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "clip-%06zu", index);
    return buf;
}

// interleaved label assignment: exact positive counts, spread evenly so any
// contiguous train/validation split sees both classes
bool is_positive(const SynthSpec& spec, size_t index) {
    const double r = spec.positive_ratio;
    return std::floor(static_cast<double>(index + 1) * r) -
               std::floor(static_cast<double>(index) * r) >=
           1.0;
}

size_t draw_pnr_frame(const SynthSpec& spec, SplitMix64& rng) {
    double f = 0.0;
    switch (spec.pnr_distribution) {
        case PnrDistribution::uniform: f = rng.uniform(); break;
        case PnrDistribution::triangular: f = rng.triangular(spec.pnr_param); break;
        case PnrDistribution::fixed: f = spec.pnr_param; break;
    }
    const double raw = std::round(f * static_cast<double>(spec.duration_frames));
    size_t frame = raw <= 1.0 ? 1 : static_cast<size_t>(raw);
    if (frame > spec.duration_frames - 1) frame = spec.duration_frames - 1;
    return frame;
}

// pattern A: a bright square in the upper-left quadrant; pattern B: a dark
// square in the lower-right quadrant (the "moved + flipped" state)
double pattern_value(const SynthSpec& spec, bool after_change, size_t h, size_t w) {
    const size_t h1 = spec.height / 8, h2 = spec.height / 2, h3 = spec.height * 7 / 8;
    const size_t w1 = spec.width / 8, w2 = spec.width / 2, w3 = spec.width * 7 / 8;
    if (!after_change) {
        return (h >= h1 && h < h2 && w >= w1 && w < w2) ? 1.0 : 0.0;
    }
    return (h >= h2 && h < h3 && w >= w2 && w < w3) ? -1.0 : 0.0;
}

}  // namespace

ClipAnnotation generate_annotation(const SynthSpec& spec, size_t index) {
    spec.validate();
    if (index >= spec.num_clips) {
        throw contract_error("generate_clip: index " + std::to_string(index) +
                             " outside spec of " + std::to_string(spec.num_clips) + " clips");
    }
    ClipAnnotation ann;
    ann.clip_id = clip_name(index);
    ann.duration_frames = spec.duration_frames;
    ann.fps = spec.fps;
    ann.state_change = is_positive(spec, index);
    if (ann.state_change) {
        SplitMix64 rng(mix_streams(spec.seed, index));
        ann.pnr_frame = draw_pnr_frame(spec, rng);
    }
    ann.validate();
    return ann;
}

std::vector<ClipAnnotation> generate_annotations(const SynthSpec& spec) {
    std::vector<ClipAnnotation> out;
    out.reserve(spec.num_clips);
    for (size_t i = 0; i < spec.num_clips; ++i) out.push_back(generate_annotation(spec, i));
    return out;
}

std::pair<Array, ClipAnnotation> generate_clip(const SynthSpec& spec, size_t index) {
    ClipAnnotation ann = generate_annotation(spec, index);
    SplitMix64 rng(mix_streams(spec.seed, index));
    if (ann.state_change) draw_pnr_frame(spec, rng);  // keep the stream aligned

    Array video = Array::zeros({spec.duration_frames, spec.height, spec.width, 1});
    double* p = video.data();
    for (size_t t = 0; t < spec.duration_frames; ++t) {
        const bool after = ann.state_change && t >= *ann.pnr_frame;
        for (size_t h = 0; h < spec.height; ++h) {
            for (size_t w = 0; w < spec.width; ++w, ++p) {
                double v = pattern_value(spec, after, h, w);
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
                *p = v;
            }
        }
    }
    return {video, ann};
}

Histogram frequency_analysis(const std::vector<ClipAnnotation>& annotations,
                             double bin_width) {
    if (!(bin_width > 0.0) || bin_width > 1.0) {
        throw contract_error("frequency_analysis: bin width must lie in (0, 1]");
    }
    std::vector<double> values;
    for (const auto& a : annotations) {
        if (a.pnr_frame) {
            values.push_back(static_cast<double>(*a.pnr_frame) /
                             static_cast<double>(a.duration_frames));
        }
    }
    if (values.empty()) {
        throw contract_error("frequency_analysis: no annotations carry a pnr_frame");
    }
    const size_t n_bins = static_cast<size_t>(std::ceil(1.0 / bin_width));
    Histogram h;
    h.counts.assign(n_bins, 0);
    h.bin_edges.resize(n_bins + 1);
    for (size_t i = 0; i <= n_bins; ++i) {
        h.bin_edges[i] = std::min(1.0, static_cast<double>(i) * bin_width);
    }
    for (double v : values) {
        size_t bin = static_cast<size_t>(std::floor(v / bin_width));
        if (bin >= n_bins) bin = n_bins - 1;
        ++h.counts[bin];
    }
    size_t mode = 0;
    for (size_t i = 1; i < n_bins; ++i) {
        if (h.counts[i] > h.counts[mode]) mode = i;
    }
    h.mode_midpoint = 0.5 * (h.bin_edges[mode] + h.bin_edges[mode + 1]);
    return h;
}

void EvalReport::check() const {
    if (task != "oscc" && task != "pnr") {
        throw contract_error("report: unknown task '" + task + "'");
    }
    if (per_clip.empty()) {
        if (accuracy || mean_abs_error_seconds) {
            throw contract_error("report: aggregates without per-clip entries");
        }
        return;
    }
    if (task == "oscc") {
        if (!accuracy) throw contract_error("report: oscc report without accuracy");
        size_t correct = 0;
        for (const auto& r : per_clip) {
            if (r.prediction == r.ground_truth) ++correct;
        }
        const double want = static_cast<double>(correct) / static_cast<double>(per_clip.size());
        if (std::abs(*accuracy - want) > 1e-12) {
            throw contract_error("report: accuracy does not match per-clip records");
        }
    } else {
        if (!mean_abs_error_seconds) throw contract_error("report: pnr report without MAE");
        double sum = 0.0;
        for (const auto& r : per_clip) sum += r.error;
        const double want = sum / static_cast<double>(per_clip.size());
        if (std::abs(*mean_abs_error_seconds - want) > 1e-12) {
            throw contract_error("report: mean error does not match per-clip records");
        }
    }
}

Histogram error_distribution(const EvalReport& report, double bin_width_seconds) {
    if (report.task != "pnr") {
        throw contract_error("error_distribution: only pnr reports carry temporal errors");
    }
    if (report.per_clip.empty()) {
        throw contract_error("error_distribution: report has no per-clip entries");
    }
    if (!(bin_width_seconds > 0.0)) {
        throw contract_error("error_distribution: bin width must be positive");
    }
    double max_err = 0.0;
    for (const auto& r : report.per_clip) max_err = std::max(max_err, r.error);
    const size_t n_bins = static_cast<size_t>(std::floor(max_err / bin_width_seconds)) + 1;
    Histogram h;
    h.counts.assign(n_bins, 0);
    h.bin_edges.resize(n_bins + 1);
    for (size_t i = 0; i <= n_bins; ++i) {
        h.bin_edges[i] = static_cast<double>(i) * bin_width_seconds;
    }
    for (const auto& r : report.per_clip) {
        size_t bin = static_cast<size_t>(std::floor(r.error / bin_width_seconds));
        if (bin >= n_bins) bin = n_bins - 1;
        ++h.counts[bin];
    }
    size_t mode = 0;
    for (size_t i = 1; i < n_bins; ++i) {
        if (h.counts[i] > h.counts[mode]) mode = i;
    }
    h.mode_midpoint = 0.5 * (h.bin_edges[mode] + h.bin_edges[mode + 1]);
    return h;
}

// ---- annotation files --------------------------------------------------------

std::vector<ClipAnnotation> read_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open");
    std::vector<ClipAnnotation> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": unparsable annotation record: " + e.what());
        }
        ClipAnnotation a;
        try {
            a.clip_id = j.at("clip_id").get<std::string>();
            a.duration_frames = j.at("duration_frames").get<size_t>();
            a.fps = j.at("fps").get<double>();
            a.state_change = j.at("state_change").get<bool>();
            if (j.contains("pnr_frame") && !j["pnr_frame"].is_null()) {
                a.pnr_frame = j["pnr_frame"].get<size_t>();
            }
        } catch (const json::exception& e) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": bad annotation field: " + e.what());
        }
        a.validate();
        out.push_back(std::move(a));
    }
    return out;
}

void write_annotations(const std::string& path, const std::vector<ClipAnnotation>& list) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    for (const auto& a : list) {
        a.validate();
        json j;
        j["clip_id"] = a.clip_id;
        j["duration_frames"] = a.duration_frames;
        j["fps"] = a.fps;
        j["state_change"] = a.state_change;
        if (a.pnr_frame) j["pnr_frame"] = *a.pnr_frame;
        out << j.dump() << "\n";
    }
    if (!out) throw io_error(path + ": write failed");
}

// ---- clip tensor files ---------------------------------------------------------

namespace {

constexpr char kClipMagic[4] = {'S', 'W', 'C', '1'};

void put_u32(std::ostream& out, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw format_error(path + ": truncated clip file");
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_clip_binary(const std::string& path, const Array& video) {
    if (!video.valid()) throw contract_error("write_clip_binary: invalid tensor");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(kClipMagic, 4);
    put_u32(out, static_cast<uint32_t>(video.rank()));
    for (size_t d : video.shape()) put_u32(out, static_cast<uint32_t>(d));
    for (size_t i = 0; i < video.numel(); ++i) {
        const float f = static_cast<float>(video.data()[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    if (!out) throw io_error(path + ": write failed");
}

Array read_clip_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kClipMagic, 4) != 0) {
        throw format_error(path + ": not a clip file (bad magic)");
    }
    const uint32_t rank = get_u32(in, path);
    if (rank == 0 || rank > 8) throw format_error(path + ": implausible clip rank");
    std::vector<size_t> shape(rank);
    size_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        shape[i] = get_u32(in, path);
        numel *= shape[i];
    }
    std::vector<double> data(numel);
    for (size_t i = 0; i < numel; ++i) {
        const uint32_t bits = get_u32(in, path);
        float f;
        std::memcpy(&f, &bits, 4);
        data[i] = static_cast<double>(f);
    }
    return Array::from_data(std::move(shape), std::move(data));
}

// ---- histograms and reports -----------------------------------------------------

void write_histogram(const std::string& path, const Histogram& h) {
    if (h.bin_edges.size() != h.counts.size() + 1) {
        throw contract_error("histogram: edge/count size mismatch");
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    char buf[64];
    for (size_t i = 0; i < h.counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g %zu\n", h.bin_edges[i], h.counts[i]);
        out << buf;
    }
    if (!out) throw io_error(path + ": write failed");
}

void write_report(const std::string& path, const EvalReport& report) {
    report.check();
    json j;
    j["task"] = report.task;
    if (report.accuracy) j["accuracy"] = *report.accuracy;
    if (report.mean_abs_error_seconds) {
        j["mean_abs_error_seconds"] = *report.mean_abs_error_seconds;
    }
    j["skipped"] = report.skipped;
    j["per_clip"] = json::array();
    for (const auto& r : report.per_clip) {
        json e;
        e["clip_id"] = r.clip_id;
        e["prediction"] = r.prediction;
        e["ground_truth"] = r.ground_truth;
        e["error"] = r.error;
        j["per_clip"].push_back(e);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
    if (!out) throw io_error(path + ": write failed");
}

EvalReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw format_error(path + ": unparsable report: " + e.what());
    }
    EvalReport r;
    try {
        r.task = j.at("task").get<std::string>();
        if (j.contains("accuracy")) r.accuracy = j["accuracy"].get<double>();
        if (j.contains("mean_abs_error_seconds")) {
            r.mean_abs_error_seconds = j["mean_abs_error_seconds"].get<double>();
        }
        r.skipped = j.value("skipped", size_t{0});
        for (const auto& e : j.at("per_clip")) {
            EvalRecord rec;
            rec.clip_id = e.at("clip_id").get<std::string>();
            rec.prediction = e.at("prediction").get<double>();
            rec.ground_truth = e.at("ground_truth").get<double>();
            rec.error = e.at("error").get<double>();
            r.per_clip.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw format_error(path + ": bad report field: " + e.what());
    }
    r.check();
    return r;
}

std::vector<ClipAnnotation> import_challenge_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw format_error(path + ": unparsable annotation export: " + e.what());
    }
    if (!j.is_array()) {
        throw format_error(path + ": expected a top-level array of clip records");
    }
    std::vector<ClipAnnotation> out;
    for (const auto& e : j) {
        ClipAnnotation a;
        try {
            a.clip_id = e.at("clip_uid").get<std::string>();
            const int64_t start = e.at("clip_start_frame").get<int64_t>();
            const int64_t end = e.at("clip_end_frame").get<int64_t>();
            if (end <= start) {
                throw validation_error("clip '" + a.clip_id + "': empty parent-frame span");
            }
            a.duration_frames = static_cast<size_t>(end - start);
            a.fps = e.value("fps", 30.0);
            a.state_change = e.at("state_change").get<bool>();
            if (e.contains("parent_pnr_frame") && !e["parent_pnr_frame"].is_null()) {
                const int64_t pnr = e["parent_pnr_frame"].get<int64_t>();
                if (pnr < start || pnr >= end) {
                    throw validation_error("clip '" + a.clip_id +
                                           "': parent_pnr_frame outside the clip span");
                }
                a.pnr_frame = static_cast<size_t>(pnr - start);
            }
        } catch (const json::exception& ex) {
            throw format_error(path + ": bad challenge record: " + std::string(ex.what()));
        }
        a.validate();
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace swinvid
