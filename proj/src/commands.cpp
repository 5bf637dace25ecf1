#include "swinvid/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "swinvid/checkpoint.hpp"
#include "swinvid/errors.hpp"
#include "swinvid/parallel.hpp"
#include "swinvid/train.hpp"

namespace swinvid {

using nlohmann::json;

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error(dir + ": cannot create directory: " + ec.message());
}

void write_config_used(const RunConfig& cfg) {
    const std::string path = cfg.out_dir + "/config.used";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << serialize_config(cfg);
    if (!out) throw io_error(path + ": write failed");
}

std::string require_data_dir(const RunConfig& cfg, const char* command) {
    if (cfg.data_dir.empty()) {
        throw validation_error(std::string("config: data.dir is required for ") + command);
    }
    return cfg.data_dir;
}

std::string checkpoint_path(const RunConfig& cfg) {
    return cfg.checkpoint_path.empty() ? cfg.out_dir + "/model.ckpt" : cfg.checkpoint_path;
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t file_fnv1a(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open");
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

// "center" or "fraction:F" -> the fraction it predicts
PnrBaselineConfig parse_baseline(const std::string& spec) {
    PnrBaselineConfig cfg;
    if (spec == "center") {
        cfg.fraction = 0.5;
        return cfg;
    }
    if (spec.rfind("fraction:", 0) == 0) {
        const std::string num = spec.substr(9);
        char* end = nullptr;
        cfg.fraction = std::strtod(num.c_str(), &end);
        if (num.empty() || end != num.c_str() + num.size()) {
            throw validation_error("baseline: cannot parse fraction in '" + spec + "'");
        }
        cfg.validate();
        return cfg;
    }
    throw validation_error("baseline: expected center or fraction:F, got '" + spec + "'");
}

TrainConfig resolved_train_config(const RunConfig& cfg) {
    TrainConfig t = cfg.train;
    t.epochs = cfg.resolved_epochs();
    t.seed = cfg.seed;
    return t;
}

// mirror every log line to the console and the run's log file
class Tee : public std::ostream, private std::streambuf {
  public:
    Tee(std::ostream& a, std::ostream& b) : std::ostream(this), a_(a), b_(b) {}

  private:
    int overflow(int c) override {
        if (c != EOF) {
            a_.put(static_cast<char>(c));
            b_.put(static_cast<char>(c));
        }
        return c;
    }
    int sync() override {
        a_.flush();
        b_.flush();
        return 0;
    }
    std::ostream& a_;
    std::ostream& b_;
};

}  // namespace

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.seed;
    spec.validate();
    cfg.validate();

    ensure_dir(cfg.out_dir);
    ensure_dir(cfg.out_dir + "/clips");
    write_config_used(cfg);

    const auto annotations = generate_annotations(spec);
    std::vector<uint64_t> clip_hashes(spec.num_clips);
    parallel_for(spec.num_clips, [&](size_t i) {
        auto [video, ann] = generate_clip(spec, i);
        const std::string path = cfg.out_dir + "/clips/" + ann.clip_id + ".swc";
        write_clip_binary(path, video);
        clip_hashes[i] = file_fnv1a(path);
    });

    const std::string ann_path = cfg.out_dir + "/annotations.jsonl";
    write_annotations(ann_path, annotations);

    uint64_t clips_hash = 0xcbf29ce484222325ull;
    for (uint64_t h : clip_hashes) clips_hash = fnv1a64(&h, sizeof h, clips_hash);

    json manifest;
    manifest["annotations_fnv1a"] = hex64(file_fnv1a(ann_path));
    manifest["clips_fnv1a"] = hex64(clips_hash);
    manifest["num_clips"] = spec.num_clips;
    manifest["seed"] = spec.seed;
    json s;
    s["positive_ratio"] = spec.positive_ratio;
    s["duration_frames"] = spec.duration_frames;
    s["distribution"] = spec.pnr_distribution == PnrDistribution::uniform ? "uniform"
                        : spec.pnr_distribution == PnrDistribution::triangular
                            ? "triangular"
                            : "fixed";
    s["pnr_param"] = spec.pnr_param;
    s["height"] = spec.height;
    s["width"] = spec.width;
    s["noise_sigma"] = spec.noise_sigma;
    s["fps"] = spec.fps;
    manifest["spec"] = s;

    const std::string man_path = cfg.out_dir + "/manifest.json";
    std::ofstream man(man_path, std::ios::trunc);
    if (!man) throw io_error(man_path + ": cannot open for writing");
    man << manifest.dump(2) << "\n";
    if (!man) throw io_error(man_path + ": write failed");

    out << "wrote " << spec.num_clips << " clips to " << cfg.out_dir << " (annotations "
        << manifest["annotations_fnv1a"].get<std::string>() << ")\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const std::string data = require_data_dir(cfg, "train");
    ensure_dir(cfg.out_dir);
    write_config_used(cfg);

    const auto examples = load_examples(data, cfg.task, cfg.sampler);
    TaskModel model(cfg.task, cfg.model, cfg.sampler, cfg.seed);

    const std::string log_path = cfg.out_dir + "/train.log";
    std::ofstream log_file(log_path, std::ios::trunc);
    if (!log_file) throw io_error(log_path + ": cannot open for writing");
    Tee tee(out, log_file);

    const std::string ckpt = checkpoint_path(cfg);
    const TrainResult result = train_model(model, examples, resolved_train_config(cfg), ckpt, tee);
    out << "checkpoint " << ckpt << " (epoch " << result.best_epoch << ")\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const std::string data = require_data_dir(cfg, "eval");
    ensure_dir(cfg.out_dir);
    write_config_used(cfg);

    const auto examples = load_examples(data, cfg.task, cfg.sampler);
    EvalReport report;
    if (!cfg.baseline.empty()) {
        if (cfg.task != TaskKind::pnr) {
            throw validation_error("baseline evaluation applies to the pnr task only");
        }
        report = evaluate_baseline(examples, parse_baseline(cfg.baseline));
    } else {
        TaskModel model(cfg.task, cfg.model, cfg.sampler, cfg.seed);
        load_checkpoint(checkpoint_path(cfg), model.entries());
        report = evaluate_model(model, examples, cfg.train.batch_size);
    }

    const std::string report_path = cfg.out_dir + "/report.json";
    write_report(report_path, report);

    out << report.task << " clips " << report.per_clip.size() << " skipped " << report.skipped;
    if (report.accuracy) out << " accuracy " << *report.accuracy;
    if (report.mean_abs_error_seconds) {
        out << " mean_abs_error_seconds " << *report.mean_abs_error_seconds;
    }
    out << "\nreport " << report_path << "\n";
}

void cmd_analyze(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    if (cfg.data_dir.empty() && cfg.report_path.empty()) {
        throw validation_error("config: analyze needs data.dir (annotations) or report");
    }
    ensure_dir(cfg.out_dir);
    write_config_used(cfg);

    if (!cfg.data_dir.empty()) {
        const auto annotations = read_annotations(cfg.data_dir + "/annotations.jsonl");
        const Histogram h = frequency_analysis(annotations, cfg.fraction_bin_width);
        const std::string path = cfg.out_dir + "/pnr_frequency.txt";
        write_histogram(path, h);
        out << "pnr frequency histogram " << path << " (mode bin midpoint " << h.mode_midpoint
            << ")\n";
    }
    if (!cfg.report_path.empty()) {
        const EvalReport report = read_report(cfg.report_path);
        const Histogram h = error_distribution(report, cfg.error_bin_seconds);
        const std::string path = cfg.out_dir + "/error_distribution.txt";
        write_histogram(path, h);
        out << "error histogram " << path << " (mode bin midpoint " << h.mode_midpoint << ")\n";
    }
}

void cmd_predict(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const std::string data = require_data_dir(cfg, "predict");
    ensure_dir(cfg.out_dir);
    write_config_used(cfg);

    const auto examples = load_examples(data, cfg.task, cfg.sampler);
    const std::string pred_path = cfg.out_dir + "/predictions.jsonl";
    std::ofstream pred(pred_path, std::ios::trunc);
    if (!pred) throw io_error(pred_path + ": cannot open for writing");

    if (!cfg.baseline.empty()) {
        if (cfg.task != TaskKind::pnr) {
            throw validation_error("baseline prediction applies to the pnr task only");
        }
        const PnrBaselineConfig base = parse_baseline(cfg.baseline);
        for (const auto& ex : examples) {
            json j;
            j["clip_id"] = ex.clip_id;
            j["frame"] = baseline_fraction(ex.duration_frames, base);
            pred << j.dump() << "\n";
        }
    } else {
        TaskModel model(cfg.task, cfg.model, cfg.sampler, cfg.seed);
        load_checkpoint(checkpoint_path(cfg), model.entries());
        const size_t batch = cfg.train.batch_size == 0 ? 1 : cfg.train.batch_size;
        for (size_t begin = 0; begin < examples.size(); begin += batch) {
            const size_t count = std::min(batch, examples.size() - begin);
            std::vector<size_t> shape = examples[begin].frames.shape();
            shape.insert(shape.begin(), count);
            Array stacked = Array::zeros(shape);
            const size_t row = examples[begin].frames.numel();
            for (size_t b = 0; b < count; ++b) {
                const Array& f = examples[begin + b].frames;
                if (f.numel() != row) {
                    throw validation_error("clip '" + examples[begin + b].clip_id +
                                           "': frame shape differs from the rest");
                }
                std::copy(f.data(), f.data() + row, stacked.data() + b * row);
            }
            Array logits = model.logits(stacked);
            const size_t width = logits.shape()[1];
            for (size_t b = 0; b < count; ++b) {
                const ClipExample& ex = examples[begin + b];
                const size_t pick = argmax_lowest(logits.data() + b * width, width);
                json j;
                j["clip_id"] = ex.clip_id;
                if (cfg.task == TaskKind::oscc) {
                    j["state_change"] = pick == 1;
                } else {
                    j["bin"] = pick;
                    j["frame"] = decode_pnr(pick, ex.duration_frames, cfg.sampler.input_size);
                }
                pred << j.dump() << "\n";
            }
        }
    }
    if (!pred) throw io_error(pred_path + ": write failed");
    out << "predictions " << pred_path << " (" << examples.size() << " clips)\n";
}

}  // namespace swinvid
