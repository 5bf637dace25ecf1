#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#ifndef SWINVID_BIN
#error "SWINVID_BIN must point at the command line binary"
#endif

namespace {

struct cmd_result {
    int exit_code;
    std::string output;
};

// run the binary with stderr folded into stdout and capture both
cmd_result run_cli(const std::string& args) {
    const std::string cmd = std::string(SWINVID_BIN) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) output += buf;
    const int status = pclose(pipe);
    REQUIRE(WIFEXITED(status));
    return {WEXITSTATUS(status), output};
}

std::string temp_dir(const char* stem) {
    const std::string dir = std::string("/tmp/swinvid_cli_") + stem;
    std::filesystem::remove_all(dir);
    return dir;
}

void write_file(const std::string& path, const std::string& text) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path);
    out << text;
    REQUIRE(out.good());
}

// a config that keeps command line runs fast
const char* kTinyModel =
    "model.patch_size = 2,2,2\n"
    "model.embed_dim = 4\n"
    "model.depths = 1,1\n"
    "model.num_heads = 1,2\n"
    "model.window_size = 2,2,2\n"
    "model.mlp_ratio = 2\n"
    "synth.num_clips = 8\n"
    "synth.duration_frames = 16\n"
    "synth.height = 8\n"
    "synth.width = 8\n"
    "synth.noise_sigma = 0.05\n"
    "train.epochs = 1\n"
    "train.batch_size = 4\n";

}  // namespace

TEST_CASE("help exits cleanly and names every subcommand") {
    cmd_result r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* sub : {"synth", "train", "eval", "analyze", "predict"}) {
        CHECK(r.output.find(sub) != std::string::npos);
    }
}

TEST_CASE("a missing subcommand or unknown flag is a usage error") {
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("synth --no-such-flag").exit_code == 1);
    CHECK(run_cli("frobnicate").exit_code == 1);
}

TEST_CASE("bad config values exit 1 and name the offending line") {
    const std::string root = temp_dir("badcfg");
    write_file(root + "/bad.cfg", "task = oscc\ntrain.lr = fast\n");
    cmd_result r = run_cli("train --config " + root + "/bad.cfg");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("bad.cfg:2") != std::string::npos);

    write_file(root + "/noeq.cfg", "just words\n");
    cmd_result r2 = run_cli("synth --config " + root + "/noeq.cfg");
    CHECK(r2.exit_code == 2);  // malformed file -> format_error -> io exit
    CHECK(r2.output.find("noeq.cfg:1") != std::string::npos);
}

TEST_CASE("a missing config file or dataset exits 2") {
    CHECK(run_cli("synth --config /tmp/swinvid_cli_no_such.cfg").exit_code == 2);
    cmd_result r = run_cli("train --data /tmp/swinvid_cli_no_such_dataset --out /tmp/swinvid_cli_x");
    CHECK(r.exit_code == 2);
}

TEST_CASE("synth, train, eval, predict, and analyze run end to end") {
    const std::string root = temp_dir("e2e");
    write_file(root + "/run.cfg", kTinyModel);

    cmd_result synth = run_cli("synth --config " + root + "/run.cfg --seed 5 --out " +
                               root + "/data");
    CHECK(synth.exit_code == 0);
    CHECK(synth.output.find("wrote 8 clips") != std::string::npos);

    cmd_result train = run_cli("train --config " + root + "/run.cfg --seed 5 --data " +
                               root + "/data --out " + root + "/run");
    CHECK(train.exit_code == 0);
    CHECK(train.output.find("epoch 1 loss") != std::string::npos);
    CHECK(std::filesystem::exists(root + "/run/model.ckpt"));

    cmd_result eval = run_cli("eval --config " + root + "/run.cfg --data " + root +
                              "/data --checkpoint " + root + "/run/model.ckpt --out " +
                              root + "/eval");
    CHECK(eval.exit_code == 0);
    CHECK(std::filesystem::exists(root + "/eval/report.json"));

    cmd_result predict = run_cli("predict --config " + root + "/run.cfg --data " + root +
                                 "/data --checkpoint " + root + "/run/model.ckpt --out " +
                                 root + "/pred");
    CHECK(predict.exit_code == 0);
    CHECK(std::filesystem::exists(root + "/pred/predictions.jsonl"));

    cmd_result analyze = run_cli("analyze --data " + root + "/data --out " + root +
                                 "/analysis");
    CHECK(analyze.exit_code == 0);
    CHECK(std::filesystem::exists(root + "/analysis/pnr_frequency.txt"));
}

TEST_CASE("command line flags override config file values") {
    const std::string root = temp_dir("layering");
    write_file(root + "/run.cfg", std::string(kTinyModel) + "seed = 1\n");

    // --seed beats the file; identical --seed runs match byte for byte
    cmd_result a = run_cli("synth --config " + root + "/run.cfg --seed 9 --out " + root + "/a");
    cmd_result b = run_cli("synth --config " + root + "/run.cfg --seed 9 --out " + root + "/b");
    cmd_result c = run_cli("synth --config " + root + "/run.cfg --out " + root + "/c");
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    CHECK(c.exit_code == 0);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    };
    CHECK(slurp(root + "/a/annotations.jsonl") == slurp(root + "/b/annotations.jsonl"));
    CHECK(slurp(root + "/a/annotations.jsonl") != slurp(root + "/c/annotations.jsonl"));

    // the stored config records the effective seed
    std::string used = slurp(root + "/a/config.used");
    CHECK(used.find("seed = 9") != std::string::npos);
}

TEST_CASE("a baseline eval needs no checkpoint and reports its error") {
    const std::string root = temp_dir("baseline");
    write_file(root + "/run.cfg", kTinyModel);
    REQUIRE(run_cli("synth --config " + root + "/run.cfg --seed 3 --out " + root + "/data")
                .exit_code == 0);
    cmd_result r = run_cli("eval --task pnr --baseline center --data " + root +
                           "/data --out " + root + "/base");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("mean_abs_error_seconds") != std::string::npos);

    cmd_result bad = run_cli("eval --task pnr --baseline nonsense --data " + root +
                             "/data --out " + root + "/base2");
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("fraction:F") != std::string::npos);
}
