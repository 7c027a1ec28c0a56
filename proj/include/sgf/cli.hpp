#pragma once

#include <string>
#include <vector>

#include "sgf/config.hpp"

namespace sgf::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Executes one subcommand against a parsed config; artifacts land in
/// cfg.out_dir.  Returns the process exit code (0/2/3/4).
int run_subcommand(const std::string& name, RunConfig& cfg);

/// Full argv entry point (flag parsing + dispatch).
int run(int argc, const char* const* argv);

}  // namespace sgf::cli
