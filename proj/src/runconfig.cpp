#include "swinvid/runconfig.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "swinvid/errors.hpp"

namespace swinvid {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
    throw validation_error("config: " + key + " = '" + value + "' is not " + want);
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) bad_value(key, value, "a number");
    return d;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v.empty() || v[0] == '-') bad_value(key, value, "a nonnegative integer");
    char* end = nullptr;
    const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size()) bad_value(key, value, "a nonnegative integer");
    return u;
}

size_t parse_size(const std::string& key, const std::string& value) {
    return static_cast<size_t>(parse_u64(key, value));
}

std::vector<size_t> parse_list(const std::string& key, const std::string& value) {
    std::vector<size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(key, item));
    if (out.empty()) bad_value(key, value, "a comma-separated integer list");
    return out;
}

Dims3 parse_dims3(const std::string& key, const std::string& value) {
    const auto v = parse_list(key, value);
    if (v.size() != 3) bad_value(key, value, "a t,h,w triple");
    return {v[0], v[1], v[2]};
}

// shortest decimal form that parses back to the same double
std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

std::string fmt_list(const std::vector<size_t>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_dims3(const Dims3& d) { return fmt_list({d.t, d.h, d.w}); }

}  // namespace

size_t RunConfig::resolved_epochs() const {
    if (epochs_set) return train.epochs;
    return task == TaskKind::oscc ? 30 : 20;
}

void RunConfig::validate() const {
    model.validate();
    sampler.validate();
    if (out_dir.empty()) throw validation_error("config: out directory must not be empty");
}

void apply_config_entry(RunConfig& cfg, const std::string& raw_key,
                        const std::string& raw_value) {
    const std::string key = trim(raw_key), value = trim(raw_value);
    if (key == "task") {
        if (value == "oscc") {
            cfg.task = TaskKind::oscc;
        } else if (value == "pnr") {
            cfg.task = TaskKind::pnr;
        } else {
            bad_value(key, value, "one of oscc|pnr");
        }
    } else if (key == "attention") {
        if (value == "dense") {
            cfg.model.attention_kind = AttentionKind::dense_window;
        } else if (value == "deform") {
            cfg.model.attention_kind = AttentionKind::deformable;
        } else {
            bad_value(key, value, "one of dense|deform");
        }
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "out") {
        cfg.out_dir = value;
    } else if (key == "data.dir") {
        cfg.data_dir = value;
    } else if (key == "checkpoint") {
        cfg.checkpoint_path = value;
    } else if (key == "report") {
        cfg.report_path = value;
    } else if (key == "baseline") {
        cfg.baseline = value;
    } else if (key == "model.patch_size") {
        cfg.model.patch_size = parse_dims3(key, value);
    } else if (key == "model.window_size") {
        cfg.model.window_size = parse_dims3(key, value);
    } else if (key == "model.in_channels") {
        cfg.model.in_channels = parse_size(key, value);
    } else if (key == "model.embed_dim") {
        cfg.model.embed_dim = parse_size(key, value);
    } else if (key == "model.depths") {
        cfg.model.depths = parse_list(key, value);
    } else if (key == "model.num_heads") {
        cfg.model.num_heads = parse_list(key, value);
    } else if (key == "model.mlp_ratio") {
        cfg.model.mlp_ratio = parse_size(key, value);
    } else if (key == "deform.n_points") {
        cfg.model.n_points = parse_size(key, value);
    } else if (key == "deform.offset_scale") {
        cfg.model.offset_scale = parse_double(key, value);
    } else if (key == "sampler.input_size") {
        cfg.sampler.input_size = parse_size(key, value);
    } else if (key == "sampler.fps") {
        cfg.sampler.fps = parse_double(key, value);
    } else if (key == "train.epochs") {
        cfg.train.epochs = parse_size(key, value);
        cfg.epochs_set = true;
    } else if (key == "train.lr") {
        cfg.train.lr = parse_double(key, value);
    } else if (key == "train.batch_size") {
        cfg.train.batch_size = parse_size(key, value);
    } else if (key == "train.val_fraction") {
        cfg.train.val_fraction = parse_double(key, value);
    } else if (key == "train.metric_target") {
        if (value == "none") {
            cfg.train.metric_target.reset();
        } else {
            cfg.train.metric_target = parse_double(key, value);
        }
    } else if (key == "synth.num_clips") {
        cfg.synth.num_clips = parse_size(key, value);
    } else if (key == "synth.positive_ratio") {
        cfg.synth.positive_ratio = parse_double(key, value);
    } else if (key == "synth.duration_frames") {
        cfg.synth.duration_frames = parse_size(key, value);
    } else if (key == "synth.distribution") {
        if (value == "uniform") {
            cfg.synth.pnr_distribution = PnrDistribution::uniform;
        } else if (value == "triangular") {
            cfg.synth.pnr_distribution = PnrDistribution::triangular;
        } else if (value == "fixed") {
            cfg.synth.pnr_distribution = PnrDistribution::fixed;
        } else {
            bad_value(key, value, "one of uniform|triangular|fixed");
        }
    } else if (key == "synth.pnr_param") {
        cfg.synth.pnr_param = parse_double(key, value);
    } else if (key == "synth.height") {
        cfg.synth.height = parse_size(key, value);
    } else if (key == "synth.width") {
        cfg.synth.width = parse_size(key, value);
    } else if (key == "synth.noise_sigma") {
        cfg.synth.noise_sigma = parse_double(key, value);
    } else if (key == "synth.fps") {
        cfg.synth.fps = parse_double(key, value);
    } else if (key == "analyze.fraction_bin_width") {
        cfg.fraction_bin_width = parse_double(key, value);
    } else if (key == "analyze.error_bin_seconds") {
        cfg.error_bin_seconds = parse_double(key, value);
    } else {
        throw validation_error("config: unknown key '" + key + "'");
    }
}

void read_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open");
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw format_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value', got '" + line + "'");
        }
        try {
            apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
        } catch (const validation_error& e) {
            throw validation_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string serialize_config(const RunConfig& cfg) {
    std::string s;
    auto put = [&](const std::string& key, const std::string& value) {
        s += key + " = " + value + "\n";
    };
    put("task", cfg.task == TaskKind::oscc ? "oscc" : "pnr");
    put("attention",
        cfg.model.attention_kind == AttentionKind::dense_window ? "dense" : "deform");
    put("seed", std::to_string(cfg.seed));
    put("out", cfg.out_dir);
    put("data.dir", cfg.data_dir);
    put("checkpoint", cfg.checkpoint_path);
    put("report", cfg.report_path);
    put("baseline", cfg.baseline);
    put("model.patch_size", fmt_dims3(cfg.model.patch_size));
    put("model.window_size", fmt_dims3(cfg.model.window_size));
    put("model.in_channels", std::to_string(cfg.model.in_channels));
    put("model.embed_dim", std::to_string(cfg.model.embed_dim));
    put("model.depths", fmt_list(cfg.model.depths));
    put("model.num_heads", fmt_list(cfg.model.num_heads));
    put("model.mlp_ratio", std::to_string(cfg.model.mlp_ratio));
    put("deform.n_points", std::to_string(cfg.model.n_points));
    put("deform.offset_scale", fmt_double(cfg.model.offset_scale));
    put("sampler.input_size", std::to_string(cfg.sampler.input_size));
    put("sampler.fps", fmt_double(cfg.sampler.fps));
    put("train.epochs", std::to_string(cfg.resolved_epochs()));
    put("train.lr", fmt_double(cfg.train.lr));
    put("train.batch_size", std::to_string(cfg.train.batch_size));
    put("train.val_fraction", fmt_double(cfg.train.val_fraction));
    put("train.metric_target",
        cfg.train.metric_target ? fmt_double(*cfg.train.metric_target) : "none");
    put("synth.num_clips", std::to_string(cfg.synth.num_clips));
    put("synth.positive_ratio", fmt_double(cfg.synth.positive_ratio));
    put("synth.duration_frames", std::to_string(cfg.synth.duration_frames));
    std::string dist = "uniform";
    if (cfg.synth.pnr_distribution == PnrDistribution::triangular) dist = "triangular";
    if (cfg.synth.pnr_distribution == PnrDistribution::fixed) dist = "fixed";
    put("synth.distribution", dist);
    put("synth.pnr_param", fmt_double(cfg.synth.pnr_param));
    put("synth.height", std::to_string(cfg.synth.height));
    put("synth.width", std::to_string(cfg.synth.width));
    put("synth.noise_sigma", fmt_double(cfg.synth.noise_sigma));
    put("synth.fps", fmt_double(cfg.synth.fps));
    put("analyze.fraction_bin_width", fmt_double(cfg.fraction_bin_width));
    put("analyze.error_bin_seconds", fmt_double(cfg.error_bin_seconds));
    return s;
}

}  // namespace swinvid
