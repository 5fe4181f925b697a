#include "commands.hpp"

#include "mcpanel/csv_io.hpp"
#include "mcpanel/panel.hpp"
#include "mcpanel/prox.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

int main(int argc, char** argv) {
  CLI::App app{"Penalized matrix completion for panel data with covariates", "mcpanel"};
  app.set_version_flag("--version", "mcpanel 1.0.0");
  mcpanel::cli::Commands commands;
  mcpanel::cli::register_commands(app, commands);

  std::vector<std::string> args(argv + 1, argv + argc);
  commands.argv.assign(argv, argv + argc);
  try {
    args = mcpanel::cli::expand_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    return commands.action ? commands.action() : 2;
  } catch (const mcpanel::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mcpanel::CsvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
