#include <exception>
#include <iostream>
#include <string>

#include "commands.hpp"
#include "twinbed/common/log.hpp"

namespace {

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinbed: digital-twin security testbed"};
  app.require_subcommand(1);
  std::string level = "info";
  app.add_option("--log-level", level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  app.parse_complete_callback([&] {
    using twinbed::log::Level;
    twinbed::log::set_level(level == "debug" ? Level::Debug
                            : level == "warn"  ? Level::Warn
                            : level == "error" ? Level::Error
                                               : Level::Info);
  });

  twinbed::cli::add_serve(app);
  twinbed::cli::add_up_down(app);
  twinbed::cli::add_scenario(app);
  twinbed::cli::add_rl(app);
  twinbed::cli::add_dose(app);
  twinbed::cli::add_export(app);
  twinbed::cli::add_detect(app);
  twinbed::cli::add_read(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
