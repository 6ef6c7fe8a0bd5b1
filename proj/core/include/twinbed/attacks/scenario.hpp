#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/attacks/interposer.hpp"
#include "twinbed/common/labels.hpp"
#include "twinbed/testbed/testbed.hpp"

namespace twinbed::attacks {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Action {
  FdiWrite,
  MitmStart,
  MitmStop,
  DosStart,
  DosStop,
  ReplayRecord,
  ReplayPlay,
  ReplayStop,
  ImplantOn,
  ImplantOff,
  Malfunction,
  MalfunctionClear,
  SetStatus,
  SetOwner,
};

std::string_view to_string(Action a);
std::optional<Action> action_from_string(std::string_view s);

enum class FdiRoute { PlantOverride, PlcWrite, MitmRewrite };

std::string_view to_string(FdiRoute r);
std::optional<FdiRoute> fdi_route_from_string(std::string_view s);

struct Event {
  std::int64_t t_ms = 0;
  Action action = Action::FdiWrite;
  // Scalar parameters as text; numbers keep their shortest round-trip form.
  std::map<std::string, std::string> params;
  std::vector<MitmRule> rules;  // MITM_START only

  std::string param(const std::string& key, const std::string& fallback = {}) const;
  double number(const std::string& key) const;
  std::optional<double> number_opt(const std::string& key) const;
};

struct ScenarioScript {
  std::string name;
  std::int64_t epoch_ms = 0;
  std::int64_t duration_ms = 0;
  std::uint64_t seed = 1;
  std::string control_owner = "EXTERNAL";
  // Historian sampling period overrides per tag.
  std::map<std::string, std::int64_t> sample_periods_ms;
  std::vector<Event> events;
};

// JSON document; see docs/scenarios.md. Throws ScenarioError with the event
// index for schema violations.
ScenarioScript parse_scenario(std::string_view text);
ScenarioScript load_scenario(const std::filesystem::path& path);

struct LogEntry {
  std::int64_t t_ms = 0;
  std::string action;
  std::string target;
  bool ok = true;
  std::string detail;
};

struct ScenarioResult {
  std::vector<LogEntry> log;
  std::vector<LabeledInterval> labels;  // covers [0, duration) without overlap
  std::unique_ptr<testbed::Testbed> bed;
};

// Testbed configuration for a script: defaults plus its sampling overrides,
// control owner and seed.
testbed::TestbedConfig testbed_config_for(const ScenarioScript& script, testbed::TestbedConfig base);

// Drives the events against a testbed on virtual time. Events fire on the
// first tick at or after their offset. A failing event is logged FAILED and
// the run continues.
class ScenarioRunner {
 public:
  ScenarioRunner(const ScenarioScript& script, testbed::TestbedConfig base = testbed::TestbedConfig::defaults());

  testbed::Testbed& bed() { return *bed_; }
  // Interposer installed on the link, created on first use.
  Interposer& interposer(testbed::LinkId link);

  // Runs the whole script and hands over the testbed for inspection.
  ScenarioResult run();

  // Writes a false value along the chosen route. Throws AttackFailed.
  void fdi_write(const std::string& tag, double value, FdiRoute route, testbed::LinkId mitm_link);

 private:
  void fire(const Event& e);
  void close_expired();
  void open_interval(const std::string& key, const std::string& source, std::optional<std::int64_t> end_ms);
  void close_interval(const std::string& key);

  ScenarioScript script_;
  std::unique_ptr<testbed::Testbed> bed_;
  std::map<testbed::LinkId, std::unique_ptr<Interposer>> interposers_;
  tagbus::TagClient operator_plant_;
  tagbus::TagClient operator_plc_;
  std::vector<LogEntry> log_;

  struct OpenInterval {
    std::int64_t start_ms;
    std::optional<std::int64_t> end_ms;
    std::string source;
  };
  std::map<std::string, OpenInterval> open_;
  std::vector<LabeledInterval> attack_intervals_;
  struct Pending {
    std::int64_t at_ms;
    std::function<void()> fn;
  };
  std::vector<Pending> pending_;
};

ScenarioResult run_scenario(const ScenarioScript& script,
                            testbed::TestbedConfig base = testbed::TestbedConfig::defaults());

// Overlapping or touching attack intervals merge; the gaps become benign.
std::vector<LabeledInterval> ground_truth(std::vector<LabeledInterval> attacks, std::int64_t duration_ms);

void write_run_log_csv(const std::vector<LogEntry>& log, const std::filesystem::path& path);

}  // namespace twinbed::attacks
