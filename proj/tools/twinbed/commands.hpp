#pragma once

#include <CLI11.hpp>

namespace twinbed::cli {

// Each registers its subcommand on `app`; the callbacks throw on failure and
// main turns the exception into an `error:` line and a nonzero exit.
void add_serve(CLI::App& app);
void add_up_down(CLI::App& app);
void add_scenario(CLI::App& app);
void add_rl(CLI::App& app);
void add_dose(CLI::App& app);
void add_export(CLI::App& app);
void add_detect(CLI::App& app);
void add_read(CLI::App& app);

}  // namespace twinbed::cli
