#pragma once

#include <string>
#include <vector>

namespace wsdiff {

// Outcome of one CLI invocation, usable in-process by tests.
struct RunResult {
    int code = 0;       // 0 ok, 2 validation, 3 numerical, 4 verify failure
    std::string out;    // stdout payload
    std::string err;    // one-line JSON error record when code != 0
};

// args = {subcommand, flag...}: the argv tail of the CLI.
// Subcommands: make-data, corrupt-labels, train, classify, plan-timesteps,
// sample, eval, condense, verify-theorem1, verify-gradients.
// Flags: --config PATH, --seed N, --out DIR, --set key=value (repeatable),
// --delta X (plan-timesteps), --ipc N (condense).
RunResult run(const std::vector<std::string>& args);

// Thin shim for main(): runs, prints out/err, returns the exit code.
int run_main(int argc, char** argv);

std::string usage_text();

} // namespace wsdiff
