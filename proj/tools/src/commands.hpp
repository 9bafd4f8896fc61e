#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "run_context.hpp"

namespace glom::cli {

/// Bad command-line arguments detected after parsing (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Returns the process exit code.
using Runner = std::function<int(RunContext&)>;

/// Registers every subcommand on `app`; runners are keyed by subcommand name.
std::map<std::string, Runner> register_commands(CLI::App& app);

}  // namespace glom::cli
