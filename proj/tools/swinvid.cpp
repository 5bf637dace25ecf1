#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "swinvid/commands.hpp"
#include "swinvid/errors.hpp"
#include "swinvid/runconfig.hpp"

// swinvid: synthesize data, train, evaluate, analyze, and predict with the
// windowed video transformer. Configuration is layered: built-in defaults,
// then the --config file, then explicit flags (flags win). Exit codes:
// 0 success, 1 validation/contract error, 2 I/O or file-format error.

namespace {

struct FlagCapture {
    CLI::App* cmd;
    // flag value -> config key, applied only when the user passed the flag
    std::map<std::string, std::pair<CLI::Option*, std::string>> bindings;
    std::string config_path;

    void bind(CLI::Option* opt, const std::string& key, const std::string& storage_key) {
        bindings[storage_key] = {opt, key};
    }
};

// attach the shared option set to one subcommand
void attach_options(CLI::App* cmd, FlagCapture& cap,
                    std::map<std::string, std::string>& values) {
    cap.cmd = cmd;
    cmd->add_option("--config", cap.config_path, "key = value configuration file");

    auto add = [&](const std::string& flag, const std::string& key, const std::string& help) {
        CLI::Option* opt = cmd->add_option(flag, values[key], help);
        cap.bind(opt, key, key);
        return opt;
    };
    add("--task", "task", "task to run (oscc|pnr)")->check(CLI::IsMember({"oscc", "pnr"}));
    add("--attention", "attention", "attention kind (dense|deform)")
        ->check(CLI::IsMember({"dense", "deform"}));
    add("--n-points", "deform.n_points", "sampled points per query for deformable attention");
    add("--input-size", "sampler.input_size", "frames fed to the model");
    add("--baseline", "baseline", "model-free pnr predictor (center|fraction:F)");
    add("--seed", "seed", "run seed");
    add("--out", "out", "output directory");
    add("--data", "data.dir", "dataset directory (annotations.jsonl + clips/)");
    add("--checkpoint", "checkpoint", "model weights to load");
    add("--report", "report", "eval report to analyze");
    add("--epochs", "train.epochs", "training epoch budget");
}

swinvid::RunConfig build_config(const FlagCapture& cap,
                                const std::map<std::string, std::string>& values) {
    swinvid::RunConfig cfg;
    if (!cap.config_path.empty()) swinvid::read_config_file(cfg, cap.config_path);
    for (const auto& [storage_key, binding] : cap.bindings) {
        const auto& [opt, key] = binding;
        if (opt->count() > 0) swinvid::apply_config_entry(cfg, key, values.at(storage_key));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale video transformer for state-change classification and "
                 "point-of-no-return localization"};
    app.require_subcommand(1);

    std::map<std::string, std::string> values;
    FlagCapture synth_cap, train_cap, eval_cap, analyze_cap, predict_cap;
    attach_options(app.add_subcommand("synth", "generate a synthetic dataset"), synth_cap,
                   values);
    attach_options(app.add_subcommand("train", "train a model"), train_cap, values);
    attach_options(app.add_subcommand("eval", "evaluate a checkpoint or baseline"), eval_cap,
                   values);
    attach_options(app.add_subcommand("analyze", "write distribution histograms"), analyze_cap,
                   values);
    attach_options(app.add_subcommand("predict", "write per-clip predictions"), predict_cap,
                   values);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("synth")) {
            swinvid::cmd_synth(build_config(synth_cap, values), std::cout);
        } else if (app.got_subcommand("train")) {
            swinvid::cmd_train(build_config(train_cap, values), std::cout);
        } else if (app.got_subcommand("eval")) {
            swinvid::cmd_eval(build_config(eval_cap, values), std::cout);
        } else if (app.got_subcommand("analyze")) {
            swinvid::cmd_analyze(build_config(analyze_cap, values), std::cout);
        } else if (app.got_subcommand("predict")) {
            swinvid::cmd_predict(build_config(predict_cap, values), std::cout);
        }
    } catch (const swinvid::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const swinvid::contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
