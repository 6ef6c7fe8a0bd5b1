#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "twinbed/common/csv.hpp"
#include "twinbed/common/text.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kData = TWINBED_DATA_DIR;
const std::string kCli = TWINBED_CLI;

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell with stderr folded into the output.
Run cli(const std::string& args) {
  Run r;
  const std::string cmd = kCli + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("twinbed_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Topology in a scratch directory pointing at the shipped component configs.
fs::path write_topology(const fs::path& dir, int base_port, bool full, const std::string& extra = {}) {
  const auto cfg = kData / "configs";
  std::ofstream f(dir / "topology.cfg");
  f << "host = 127.0.0.1\nrun_dir = run\n";
  f << "plant.port = " << base_port << "\nplant.config = " << (cfg / "plant.cfg").string() << "\n";
  if (full) {
    f << "plc.port = " << base_port + 1 << "\nplc.config = " << (cfg / "plc.cfg").string() << "\n";
    f << "historian.port = " << base_port + 2 << "\nhistorian.config = " << (cfg / "historian.cfg").string() << "\n";
    f << "twin.port = " << base_port + 3 << "\ntwin.config = " << (cfg / "twin.cfg").string() << "\n";
  } else {
    f << "plc.enabled = false\nhistorian.enabled = false\ntwin.enabled = false\n";
  }
  f << extra;
  return dir / "topology.cfg";
}

// `up` runs in the foreground until `down`; start it in the background.
void start_up(const fs::path& topology, const fs::path& log) {
  const std::string cmd = kCli + " up --topology " + topology.string() + " > " + log.string() + " 2>&1 &";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
}

bool wait_for_text(const fs::path& file, const std::string& text, int timeout_ms) {
  for (int waited = 0; waited < timeout_ms; waited += 50) {
    std::ifstream f(file);
    std::stringstream ss;
    ss << f.rdbuf();
    if (ss.str().find(text) != std::string::npos) return true;
    usleep(50 * 1000);
  }
  return false;
}

}  // namespace

TEST(Cli, HelpAndBadFlags) {
  EXPECT_EQ(cli("--help").code, 0);
  const auto bad = cli("dose probe --no-such-flag");
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(bad.out.rfind("error:", 0), 0u) << bad.out;
}

TEST(Cli, PlantOnlyTopologyAnswersStatus) {
  const auto dir = scratch("plant_only");
  const auto topo = write_topology(dir, 47310, false);
  start_up(topo, dir / "up.log");
  ASSERT_TRUE(wait_for_text(dir / "up.log", "\nup\n", 10000)) << cli("down --topology " + topo.string()).out;
  const auto st = cli("read --port 47310");
  EXPECT_EQ(st.code, 0) << st.out;
  EXPECT_NE(st.out.find("SIM_STATUS"), std::string::npos) << st.out;
  const auto down = cli("down --topology " + topo.string());
  EXPECT_EQ(down.code, 0) << down.out;
  EXPECT_TRUE(wait_for_text(dir / "up.log", "down", 10000));
}

TEST(Cli, FullTopologyMirrorsAndRestarts) {
  const auto dir = scratch("full");
  const auto topo = write_topology(dir, 47320, true);
  for (int round = 0; round < 2; ++round) {
    const auto log = dir / ("up" + std::to_string(round) + ".log");
    start_up(topo, log);
    ASSERT_TRUE(wait_for_text(log, "\nup\n", 15000)) << cli("down --topology " + topo.string()).out;
    std::ifstream f(log);
    std::stringstream ss;
    ss << f.rdbuf();
    for (const char* name : {"plant", "plc", "historian", "twin"}) {
      EXPECT_NE(ss.str().find(std::string(name) + " ready"), std::string::npos) << ss.str();
    }
    double cw = 0.0;
    for (int i = 0; i < 40 && cw == 0.0; ++i) {
      const auto r = cli("read CW_TEMP --port 47323");
      const auto pos = r.out.find("CW_TEMP");
      if (r.code == 0 && pos != std::string::npos) {
        std::istringstream line(r.out.substr(pos + 7));
        line >> cw;
      }
      if (cw == 0.0) usleep(100 * 1000);
    }
    EXPECT_NEAR(cw, 14.77, 0.1);
    const auto down = cli("down --topology " + topo.string());
    EXPECT_EQ(down.code, 0) << down.out;
    EXPECT_NE(down.out.find("stopped 4"), std::string::npos) << down.out;
    ASSERT_TRUE(wait_for_text(log, "down", 15000));
  }
  EXPECT_TRUE(fs::exists(dir / "run" / "historian"));
}

TEST(Cli, PortCollisionNamesBothComponents) {
  const auto dir = scratch("collision");
  const auto topo = write_topology(dir, 47330, true, "twin.port = 47331\n");
  const auto r = cli("up --topology " + topo.string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("plc"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("twin"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("47331"), std::string::npos) << r.out;
}

TEST(Cli, ScenarioThenExportShowsStep) {
  const auto dir = scratch("scenario");
  const auto run = cli("scenario run " + (kData / "scenarios/fdi_cw_temp.scn").string() + " --out " +
                       (dir / "run").string());
  ASSERT_EQ(run.code, 0) << run.out;
  const auto csv = dir / "cw.csv";
  const auto exp = cli("export CW_TEMP --run " + (dir / "run").string() + " --out " + csv.string());
  ASSERT_EQ(exp.code, 0) << exp.out;
  const auto table = twinbed::read_csv(csv);
  const auto col = table.column("CW_TEMP");
  int steps = 0;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const double a = *twinbed::parse_double(table.rows[i - 1][col]);
    const double b = *twinbed::parse_double(table.rows[i][col]);
    if (b == 200.0 && a != 200.0) {
      ++steps;
      EXPECT_NEAR(a, 14.77, 0.1);
    }
  }
  EXPECT_EQ(steps, 1);
  EXPECT_TRUE(fs::exists(dir / "run" / "labels.csv"));
}

TEST(Cli, DetectRunScoresScenario) {
  const auto dir = scratch("detect");
  ASSERT_EQ(cli("scenario run " + (kData / "scenarios/fdi_cw_temp.scn").string() + " --out " + (dir / "run").string()).code, 0);
  const auto r = cli("detect run --series " + (dir / "run" / "series.csv").string() + " --labels " +
                     (dir / "run" / "labels.csv").string() + " --config " + (kData / "configs/detect.cfg").string() +
                     " --out " + (dir / "detections").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("detection_rate 1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("false_alarm_rate 0"), std::string::npos) << r.out;
}

TEST(Cli, DoseProbeOutOfRangeIsZero) {
  const auto r = cli("dose probe --source " + (kData / "dose/source.cfg").string() + " --x 500 --y 0 --z 0");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("zone OUT"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("rate_sv_hr 0\n"), std::string::npos) << r.out;
}

TEST(Cli, RlTrainThenEvaluate) {
  const auto dir = scratch("rl");
  {
    std::ofstream m(dir / "tiny.map");
    m << "#######\n#S....#\n#.....#\n#....G#\n#######\n";
    std::ofstream c(dir / "train.cfg");
    c << "steps = 3000\nzones = 0\nlearning_starts = 200\ncheckpoint_every = 1000\ncheckpoint_episodes = 10\n";
  }
  const auto policy = dir / "policy.json";
  const auto train = cli("rl train --config " + (dir / "train.cfg").string() + " --map " + (dir / "tiny.map").string() +
                         " --out " + policy.string());
  ASSERT_EQ(train.code, 0) << train.out;
  ASSERT_TRUE(fs::exists(policy));
  const auto eval = cli("rl eval --config " + (dir / "train.cfg").string() + " --map " + (dir / "tiny.map").string() +
                        " --policy " + policy.string() + " --episodes 50 --deterministic");
  ASSERT_EQ(eval.code, 0) << eval.out;
  EXPECT_NE(eval.out.find("success_rate "), std::string::npos) << eval.out;
  EXPECT_NE(eval.out.find("/50)"), std::string::npos) << eval.out;
}
