#pragma once

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinbed/common/config.hpp"

namespace twinbed::testbed {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ComponentSpec {
  std::string name;  // plant, plc, historian, twin
  bool enabled = true;
  std::uint16_t port = 0;
  std::filesystem::path config;
};

// Which components run, where they listen and what they read. Keys:
// host, run_dir, epoch_ms and per component <name>.enabled, <name>.port,
// <name>.config. Relative config paths resolve against the topology file.
struct Topology {
  std::string host = "127.0.0.1";
  std::filesystem::path run_dir = "run";
  // Shared time base in Unix milliseconds; 0 takes the wall clock at up().
  std::int64_t epoch_ms = 0;
  std::vector<ComponentSpec> components;  // start order

  static Topology from_config(const KeyValueConfig& cfg, const std::filesystem::path& base_dir = {});
  static Topology load(const std::filesystem::path& path);

  // Unique ports, a config for every enabled component and the dependencies
  // of each enabled component enabled too. Throws TopologyError.
  void validate() const;

  const ComponentSpec& component(const std::string& name) const;
  const ComponentSpec* enabled(const std::string& name) const;
};

struct Child {
  std::string name;
  pid_t pid = -1;
  std::uint16_t port = 0;
};

// Starts the enabled components as child processes of `exe serve <name>`,
// in dependency order, waiting for each to answer STATUS before the next.
// Pid files go to the run directory.
class Supervisor {
 public:
  Supervisor(Topology topology, std::filesystem::path exe);
  ~Supervisor();
  Supervisor(const Supervisor&) = delete;
  Supervisor& operator=(const Supervisor&) = delete;

  // Throws TopologyError if a component fails to start; the ones already
  // started are stopped again.
  void up(int ready_timeout_ms = 5000);
  // Blocks until every child has exited or a SIGINT/SIGTERM arrives, then
  // stops the remaining children. Returns the number of children that exited
  // abnormally.
  int wait();
  // SIGTERM in reverse order, SIGKILL after the grace period.
  void down(int grace_ms = 5000);

  const std::vector<Child>& children() const { return children_; }

 private:
  Topology topology_;
  std::filesystem::path exe_;
  std::vector<Child> children_;
  int abnormal_ = 0;
};

// Stops the components recorded in `run_dir` by another process. Returns the
// number of processes signalled.
int stop_run_dir(const std::filesystem::path& run_dir, int grace_ms = 5000);

// True once a STATUS request to host:port succeeds.
bool wait_ready(const std::string& host, std::uint16_t port, int timeout_ms);

}  // namespace twinbed::testbed
