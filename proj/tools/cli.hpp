#pragma once

#include "manifest.hpp"
#include "params.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace weyllab::cli {

struct CommandOutput {
    std::vector<Artifact> files;
    std::vector<std::string> summary; // lines printed to stdout after the run
    bool stochastic = false;          // the run consumed a seed
};

std::vector<std::string> command_names();

// Runs one command on its configuration; writes nothing to disk.
CommandOutput run_command(const std::string& name, Params& params, unsigned threads, std::ostream& log);

// Full command line: exit 0 on success, 1 when --check finds a mismatch,
// 2 on configuration or input errors, 3 on numerical failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace weyllab::cli
