#pragma once

#include <CLI11.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mcpanel::cli {

/// Owns the parsed arguments of every subcommand. After parsing, `action`
/// runs the selected command and returns its exit status.
struct Commands {
  std::function<int()> action;
  std::vector<std::string> argv;
  std::shared_ptr<void> state;
};

void register_commands(CLI::App& app, Commands& commands);

/// Inserts `--key value` pairs from a flat `key = value` file named by
/// --config. Keys already given on the command line are skipped, so flags
/// override the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app);

}  // namespace mcpanel::cli
