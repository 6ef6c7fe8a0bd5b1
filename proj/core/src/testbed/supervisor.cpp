#include "twinbed/testbed/supervisor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>

#include "twinbed/common/log.hpp"
#include "twinbed/tagbus/link.hpp"
#include "twinbed/testbed/services.hpp"

namespace twinbed::testbed {

namespace {

const std::vector<std::string>& component_names() {
  static const std::vector<std::string> names{"plant", "plc", "historian", "twin"};
  return names;
}

const std::map<std::string, std::vector<std::string>>& dependencies() {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"plant", {}}, {"plc", {"plant"}}, {"historian", {"plc", "plant"}}, {"twin", {"historian"}}};
  return deps;
}

std::filesystem::path pid_path(const std::filesystem::path& run_dir, const std::string& name) {
  return run_dir / (name + ".pid");
}

bool alive(pid_t pid) { return pid > 0 && ::kill(pid, 0) == 0; }

// Reaps `pid` if it is our child; for foreign processes only checks liveness.
bool exited(pid_t pid, int* status) {
  const pid_t r = ::waitpid(pid, status, WNOHANG);
  if (r == pid) return true;
  if (r < 0 && errno == ECHILD) return !alive(pid);
  return false;
}

void terminate_and_wait(pid_t pid, int grace_ms, int* status) {
  if (pid <= 0) return;
  ::kill(pid, SIGTERM);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(grace_ms);
  while (!exited(pid, status)) {
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, status, 0);
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace

Topology Topology::from_config(const KeyValueConfig& cfg, const std::filesystem::path& base_dir) {
  Topology t;
  t.host = cfg.get_string("host", t.host);
  auto resolve = [&](const std::filesystem::path& p) {
    return p.empty() || p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  t.run_dir = resolve(cfg.get_string("run_dir", t.run_dir.string()));
  t.epoch_ms = cfg.get_int("epoch_ms", 0);
  std::uint16_t next_port = 4810;
  for (const auto& name : component_names()) {
    ComponentSpec c;
    c.name = name;
    c.enabled = cfg.get_bool(name + ".enabled", true);
    const auto port = cfg.get_int(name + ".port", next_port);
    if (port <= 0 || port > 65535) throw TopologyError(name + ".port out of range: " + std::to_string(port));
    c.port = static_cast<std::uint16_t>(port);
    c.config = resolve(cfg.get_string(name + ".config", ""));
    t.components.push_back(std::move(c));
    ++next_port;
  }
  return t;
}

Topology Topology::load(const std::filesystem::path& path) {
  return from_config(KeyValueConfig::load(path), path.parent_path());
}

void Topology::validate() const {
  std::map<std::uint16_t, std::string> used;
  for (const auto& c : components) {
    if (!c.enabled) continue;
    if (c.config.empty()) throw TopologyError(c.name + " is enabled but has no config");
    if (auto it = used.find(c.port); it != used.end()) {
      throw TopologyError("port collision: " + it->second + " and " + c.name + " both use port " +
                          std::to_string(c.port));
    }
    used.emplace(c.port, c.name);
    for (const auto& dep : dependencies().at(c.name)) {
      if (!enabled(dep)) throw TopologyError(c.name + " needs " + dep + ", which is disabled");
    }
  }
}

const ComponentSpec& Topology::component(const std::string& name) const {
  for (const auto& c : components) {
    if (c.name == name) return c;
  }
  throw TopologyError("unknown component: " + name);
}

const ComponentSpec* Topology::enabled(const std::string& name) const {
  const auto& c = component(name);
  return c.enabled ? &c : nullptr;
}

bool wait_ready(const std::string& host, std::uint16_t port, int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  tagbus::TcpLink link(host, port, 200);
  std::uint64_t id = 1;
  while (std::chrono::steady_clock::now() < deadline) {
    try {
      if (link.exchange(tagbus::make_status(id++)).ok) return true;
    } catch (const std::exception&) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return false;
}

Supervisor::Supervisor(Topology topology, std::filesystem::path exe)
    : topology_(std::move(topology)), exe_(std::move(exe)) {
  topology_.validate();
}

Supervisor::~Supervisor() { down(); }

void Supervisor::up(int ready_timeout_ms) {
  std::filesystem::create_directories(topology_.run_dir);
  const auto epoch = std::to_string(topology_.epoch_ms != 0 ? topology_.epoch_ms : wall_clock_ms());
  for (const auto& c : topology_.components) {
    if (!c.enabled) continue;
    if (auto p = pid_path(topology_.run_dir, c.name); std::filesystem::exists(p)) {
      std::ifstream in(p);
      pid_t old = -1;
      in >> old;
      if (alive(old)) {
        down();
        throw TopologyError(c.name + " is already running with pid " + std::to_string(old));
      }
    }

    std::vector<std::string> args{exe_.string(), "serve", c.name, "--port", std::to_string(c.port),
                                  "--config", c.config.string(), "--host", topology_.host, "--epoch", epoch};
    if (c.name == "plc" || c.name == "historian") {
      args.push_back("--plant-port");
      args.push_back(std::to_string(topology_.component("plant").port));
    }
    if (c.name == "historian") {
      args.push_back("--plc-port");
      args.push_back(std::to_string(topology_.component("plc").port));
      args.push_back("--snapshot-dir");
      args.push_back((topology_.run_dir / "historian").string());
    }
    if (c.name == "twin") {
      args.push_back("--historian-port");
      args.push_back(std::to_string(topology_.component("historian").port));
    }
    const auto log_file = topology_.run_dir / (c.name + ".log");

    const pid_t pid = ::fork();
    if (pid < 0) {
      down();
      throw TopologyError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
      const int fd = ::open(log_file.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
      if (fd >= 0) {
        ::dup2(fd, STDOUT_FILENO);
        ::dup2(fd, STDERR_FILENO);
        ::close(fd);
      }
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(argv[0], argv.data());
      std::_Exit(127);
    }
    children_.push_back({c.name, pid, c.port});
    {
      std::ofstream out(pid_path(topology_.run_dir, c.name));
      out << pid << "\n";
    }

    if (!wait_ready(topology_.host, c.port, ready_timeout_ms)) {
      down();
      throw TopologyError(c.name + " did not become ready on port " + std::to_string(c.port) + "; see " +
                          log_file.string());
    }
    log::info("supervisor", c.name + " ready on port " + std::to_string(c.port) + " pid " + std::to_string(pid));
  }
}

int Supervisor::wait() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigset_t old;
  pthread_sigmask(SIG_BLOCK, &set, &old);
  const timespec poll{0, 100'000'000};
  bool signalled = false;
  while (!signalled) {
    bool any = false;
    for (auto& ch : children_) {
      if (ch.pid <= 0) continue;
      int status = 0;
      if (exited(ch.pid, &status)) {
        if (!(WIFEXITED(status) && WEXITSTATUS(status) == 0)) ++abnormal_;
        log::info("supervisor", ch.name + " exited");
        std::filesystem::remove(pid_path(topology_.run_dir, ch.name));
        ch.pid = -1;
      } else {
        any = true;
      }
    }
    if (!any) break;
    signalled = sigtimedwait(&set, nullptr, &poll) > 0;
  }
  down();
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  return abnormal_;
}

void Supervisor::down(int grace_ms) {
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
    if (it->pid <= 0) continue;
    int status = 0;
    terminate_and_wait(it->pid, grace_ms, &status);
    if (!(WIFEXITED(status) && WEXITSTATUS(status) == 0)) ++abnormal_;
    std::filesystem::remove(pid_path(topology_.run_dir, it->name));
    it->pid = -1;
  }
}

int stop_run_dir(const std::filesystem::path& run_dir, int grace_ms) {
  int count = 0;
  const auto& names = component_names();
  for (auto it = names.rbegin(); it != names.rend(); ++it) {
    const auto p = pid_path(run_dir, *it);
    if (!std::filesystem::exists(p)) continue;
    std::ifstream in(p);
    pid_t pid = -1;
    in >> pid;
    in.close();
    if (alive(pid)) {
      int status = 0;
      terminate_and_wait(pid, grace_ms, &status);
      ++count;
    }
    std::filesystem::remove(p);
  }
  // A foreground `up` writes its own pid so that it can be told to stop too.
  if (const auto p = run_dir / "supervisor.pid"; std::filesystem::exists(p)) {
    std::ifstream in(p);
    pid_t pid = -1;
    in >> pid;
    if (alive(pid)) ::kill(pid, SIGTERM);
  }
  return count;
}

}  // namespace twinbed::testbed
