#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"
#include "glomkit/errors.hpp"
#include "json_config.hpp"
#include "run_context.hpp"

int main(int argc, char** argv) {
  using namespace glom::cli;

  CLI::App app{"glomkit: glomerulus segmentation and lesion classification toolkit"};
  app.set_version_flag("--version", std::string(GLOMKIT_VERSION));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  // Subcommands pass --config up to the root, where CLI11 reads config files.
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file with option values");
  app.allow_config_extras(CLI::config_extras_mode::error);
  auto runners = register_commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    RunContext ctx(sub->get_name(), sub->get_option("--out")->as<std::string>(),
                   JsonConfig::resolved(*sub));
    const int code = runners.at(sub->get_name())(ctx);
    ctx.write_manifest();
    return code;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const glom::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
