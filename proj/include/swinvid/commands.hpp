#pragma once

#include <ostream>
#include <string>

#include "swinvid/runconfig.hpp"

// Subcommand implementations behind the command-line entry point. Each one
// creates the run directory, drops the canonical serialized config next to
// its outputs, and throws the library's error types for the CLI to map onto
// exit codes (contract/validation -> 1, io/format -> 2).

namespace swinvid {

// generate the synthetic dataset into out: clips/ + annotations.jsonl + a
// manifest recording the generator settings, seed, and content hashes
void cmd_synth(const RunConfig& cfg, std::ostream& out);

// train a model on data.dir; writes train.log and the best checkpoint
void cmd_train(const RunConfig& cfg, std::ostream& out);

// evaluate a checkpoint (or, for pnr, a --baseline predictor) on data.dir and
// write report.json
void cmd_eval(const RunConfig& cfg, std::ostream& out);

// write the normalized-PNR histogram for data.dir annotations and/or the
// error-distribution histogram for an eval report
void cmd_analyze(const RunConfig& cfg, std::ostream& out);

// run a checkpoint (or baseline) over data.dir without ground truth and
// write per-clip predictions as line-delimited records
void cmd_predict(const RunConfig& cfg, std::ostream& out);

// 64-bit FNV-1a, the hash recorded in synth manifests
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull);

}  // namespace swinvid
