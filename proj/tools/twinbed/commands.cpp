#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "twinbed/attacks/scenario.hpp"
#include "twinbed/common/config.hpp"
#include "twinbed/common/labels.hpp"
#include "twinbed/common/text.hpp"
#include "twinbed/detect/detect.hpp"
#include "twinbed/historian/historian.hpp"
#include "twinbed/raddose/dose.hpp"
#include "twinbed/rlnav/agent.hpp"
#include "twinbed/tagbus/link.hpp"
#include "twinbed/twin/twin.hpp"

namespace twinbed::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kDefaultRunDir = "run/scenario";

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : split(s, ',')) {
    auto t = std::string(trim(part));
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void add_scenario(CLI::App& app) {
  struct Args {
    std::string file;
    std::optional<std::uint64_t> seed;
    std::string out = kDefaultRunDir;
  };
  auto a = std::make_shared<Args>();
  auto* scenario = app.add_subcommand("scenario", "Attack scenarios");
  scenario->require_subcommand(1);
  auto* run = scenario->add_subcommand("run", "Run a scenario on virtual time and write its logs and series");
  run->add_option("file", a->file, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", a->seed, "Override the scenario seed");
  run->add_option("--out", a->out, "Output directory");
  run->callback([a] {
    auto script = attacks::load_scenario(a->file);
    if (a->seed) script.seed = *a->seed;
    auto result = attacks::run_scenario(script);
    const fs::path out = a->out;
    fs::create_directories(out);
    attacks::write_run_log_csv(result.log, out / "run_log.csv");
    write_labels_csv(out / "labels.csv", result.labels);

    const auto& store = result.bed->historian().store();
    const auto hist_dir = out / "historian";
    fs::remove_all(hist_dir);
    store.save_snapshot(hist_dir);
    std::vector<std::string> tags;
    for (const auto& e : result.bed->historian().manifest()) tags.push_back(e.tag);
    historian::export_csv(store, tags, 0, script.duration_ms, out / "series.csv");

    int failed = 0;
    for (const auto& e : result.log) failed += e.ok ? 0 : 1;
    std::cout << "scenario " << script.name << ": " << result.log.size() << " events, " << failed << " failed, "
              << script.duration_ms << " ms simulated\n";
    for (const auto& e : result.log) {
      std::cout << "  " << e.t_ms << " " << e.action << " " << e.target << " " << (e.ok ? "OK" : "FAILED")
                << (e.detail.empty() ? "" : " " + e.detail) << "\n";
    }
    std::cout << "wrote " << out.string() << "/{run_log.csv,labels.csv,series.csv,historian/}" << std::endl;
  });
}

namespace {

struct NavSetup {
  rlnav::GridMap map;
  rlnav::EnvConfig env;
};

// Layout from a map file, or from the twin's NAV_MAP and NAV_ZONES tags.
NavSetup nav_setup(const std::string& map_path, const std::string& twin, const KeyValueConfig& cfg) {
  auto env = rlnav::env_config_from(cfg);
  if (twin.empty()) return {rlnav::GridMap::load(map_path), env};
  const auto colon = twin.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("--twin expects host:port, got " + twin);
  const auto port = parse_int(twin.substr(colon + 1));
  if (!port || *port <= 0 || *port > 65535) throw std::invalid_argument("bad port in --twin " + twin);
  tagbus::TagClient client(std::make_unique<tagbus::TcpLink>(twin.substr(0, colon), static_cast<std::uint16_t>(*port)));
  auto tags = client.read_tags({twin::tags::kNavMap, twin::tags::kNavZones});
  auto text = [&](const char* name) {
    const auto* s = std::get_if<std::string>(&tags.at(name).value);
    if (!s) throw std::runtime_error(std::string(name) + " is not text");
    return *s;
  };
  env.fixed_zones = rlnav::parse_zones(text(twin::tags::kNavZones));
  return {rlnav::GridMap::parse(text(twin::tags::kNavMap)), env};
}

KeyValueConfig optional_config(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

}  // namespace

void add_rl(CLI::App& app) {
  auto* rl = app.add_subcommand("rl", "Radiation-aware navigation");
  rl->require_subcommand(1);

  struct TrainArgs {
    std::string config;
    std::string map = "data/maps/reference_20x20.map";
    std::string twin;
    std::string out = "policy.json";
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;
  };
  auto t = std::make_shared<TrainArgs>();
  auto* train = rl->add_subcommand("train", "Train a Double Q-learning policy");
  train->add_option("--config", t->config, "Training config file")->check(CLI::ExistingFile);
  auto* tm = train->add_option("--map", t->map, "Map file")->check(CLI::ExistingFile);
  train->add_option("--twin", t->twin, "Read map and zones from a twin at host:port")->excludes(tm);
  train->add_option("--out", t->out, "Policy output file");
  train->add_option("--steps", t->steps, "Override training steps");
  train->add_option("--seed", t->seed, "Override the training seed");
  train->callback([t] {
    auto cfg = optional_config(t->config);
    if (t->steps) cfg.set("steps", std::to_string(*t->steps));
    if (t->seed) cfg.set("seed", std::to_string(*t->seed));
    auto setup = nav_setup(t->map, t->twin, cfg);
    const auto tc = rlnav::train_config_from(cfg);
    rlnav::NavEnv env(setup.map, setup.env);
    rlnav::TrainStats stats;
    auto policy = rlnav::train(env, tc, &stats, [](const rlnav::TrainStats& s) {
      std::cout << "step " << s.steps << " episodes " << s.episodes << " successes " << s.successes << " loss "
                << format_double(s.last_loss) << std::endl;
    });
    policy->save(t->out);
    std::cout << "trained " << stats.steps << " steps, " << stats.episodes << " episodes";
    if (tc.checkpoint_every > 0) {
      std::cout << ", kept step " << stats.best_checkpoint_step << " (check success "
                << format_double(stats.best_checkpoint_success) << ")";
    }
    std::cout << "\nsaved " << t->out << std::endl;
  });

  struct EvalArgs {
    std::string config;
    std::string map = "data/maps/reference_20x20.map";
    std::string twin;
    std::string policy = "policy.json";
    int episodes = 50;
    bool deterministic = false;
    bool random = false;
    double epsilon = 0.05;
    std::uint64_t base_seed = 1000000;
    std::string out;
  };
  auto e = std::make_shared<EvalArgs>();
  auto* eval = rl->add_subcommand("eval", "Evaluate a trained policy");
  eval->add_option("--config", e->config, "Environment config file")->check(CLI::ExistingFile);
  auto* em = eval->add_option("--map", e->map, "Map file")->check(CLI::ExistingFile);
  eval->add_option("--twin", e->twin, "Read map and zones from a twin at host:port")->excludes(em);
  eval->add_option("--policy", e->policy, "Policy file");
  eval->add_option("--episodes", e->episodes, "Episode count")->check(CLI::PositiveNumber);
  eval->add_flag("--deterministic", e->deterministic, "Greedy actions only");
  eval->add_flag("--random", e->random, "Uniformly random actions instead of the policy");
  eval->add_option("--epsilon", e->epsilon, "Exploration rate when not deterministic")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--base-seed", e->base_seed, "Episode i resets with base seed + i");
  eval->add_option("--out", e->out, "Per-episode CSV report");
  eval->callback([e] {
    auto cfg = optional_config(e->config);
    auto setup = nav_setup(e->map, e->twin, cfg);
    rlnav::NavEnv env(setup.map, setup.env);
    rlnav::EvalReport report;
    if (e->random) {
      report = rlnav::evaluate_random(env, e->episodes, e->base_seed ^ 0x5eedULL, e->base_seed);
    } else {
      auto policy = rlnav::DoubleQLearner::load(e->policy);
      if (policy->map_width() != setup.map.width() || policy->map_height() != setup.map.height()) {
        throw std::runtime_error("policy was trained on a " + std::to_string(policy->map_width()) + "x" +
                                 std::to_string(policy->map_height()) + " map");
      }
      report = rlnav::evaluate(env, *policy, e->episodes, e->deterministic, e->base_seed, e->epsilon);
    }
    if (!e->out.empty()) rlnav::write_eval_csv(report, e->out);
    int wins = 0;
    for (const auto& ep : report.episodes) wins += ep.outcome == rlnav::Outcome::Goal ? 1 : 0;
    std::cout << "success_rate " << format_double(report.success_rate()) << " (" << wins << "/"
              << report.episodes.size() << ")" << std::endl;
  });
}

void add_dose(CLI::App& app) {
  struct Args {
    std::string source = "data/dose/source.cfg";
    double x = 0, y = 0, z = 0;
  };
  auto a = std::make_shared<Args>();
  auto* dose = app.add_subcommand("dose", "Radiation dose field");
  dose->require_subcommand(1);
  auto* probe = dose->add_subcommand("probe", "Dose rate at one position");
  probe->add_option("--source", a->source, "Source config file")->check(CLI::ExistingFile);
  probe->add_option("--x", a->x, "x in metres")->required();
  probe->add_option("--y", a->y, "y in metres")->required();
  probe->add_option("--z", a->z, "z in metres")->required();
  probe->callback([a] {
    const auto src =
        raddose::RadiationSource::from_config(KeyValueConfig::load(a->source), fs::path(a->source).parent_path());
    const auto ev = raddose::evaluate_dose(src, {a->x, a->y, a->z});
    std::ostringstream out;
    out << std::setprecision(6);
    out << "zone " << raddose::to_string(ev.zone) << "\n"
        << "distance_m " << ev.distance_m << "\n"
        << "rate_sv_s " << ev.rate_sv_s << "\n"
        << "rate_sv_hr " << ev.rate_sv_s * raddose::kSecondsPerHour << "\n";
    std::cout << out.str() << std::flush;
  });
}

void add_export(CLI::App& app) {
  struct Args {
    std::vector<std::string> tags;
    std::string run = kDefaultRunDir;
    std::string out;
    std::int64_t t0 = 0;
    std::optional<std::int64_t> t1;
  };
  auto a = std::make_shared<Args>();
  auto* exp = app.add_subcommand("export", "Aligned CSV and a gnuplot script for historian series");
  exp->add_option("tags", a->tags, "Tags, space or comma separated")->required()->delimiter(',');
  exp->add_option("--run", a->run, "Scenario output directory");
  exp->add_option("--out", a->out, "CSV path (default <run>/export.csv)");
  exp->add_option("--t0", a->t0, "Start, ms");
  exp->add_option("--t1", a->t1, "End, ms (exclusive)");
  exp->callback([a] {
    const auto dir = fs::path(a->run) / "historian";
    if (!fs::is_directory(dir)) throw std::runtime_error("no historian snapshot in " + a->run);
    const auto store = historian::SeriesStore::load_snapshot(dir);
    std::int64_t t1 = 0;
    if (a->t1) {
      t1 = *a->t1;
    } else {
      for (const auto& tag : a->tags) {
        if (auto s = store.latest(tag)) t1 = std::max(t1, s->t_ms + 1);
      }
    }
    const fs::path csv = a->out.empty() ? fs::path(a->run) / "export.csv" : fs::path(a->out);
    historian::export_csv(store, a->tags, a->t0, t1, csv);

    auto gp = csv;
    gp.replace_extension(".gp");
    std::ofstream plot(gp);
    if (!plot) throw std::runtime_error("cannot write " + gp.string());
    plot << "set datafile separator ','\n"
         << "set key autotitle columnhead\n"
         << "set xlabel 'time (s)'\n"
         << "set grid\n"
         << "set terminal pngcairo size 1200,600\n"
         << "set output '" << fs::path(csv).replace_extension(".png").filename().string() << "'\n"
         << "plot ";
    for (std::size_t i = 0; i < a->tags.size(); ++i) {
      plot << (i ? ", \\\n     " : "") << "'" << csv.filename().string() << "' using ($1/1000):" << i + 2
           << " with steps";
    }
    plot << "\n";
    std::cout << "wrote " << csv.string() << " and " << gp.string() << std::endl;
  });
}

void add_detect(CLI::App& app) {
  struct Args {
    std::string series;
    std::string config;
    std::string labels;
    std::string out;
  };
  auto a = std::make_shared<Args>();
  auto* det = app.add_subcommand("detect", "Offline anomaly detection");
  det->require_subcommand(1);
  auto* run = det->add_subcommand("run", "Run the step and oscillation detectors over an aligned CSV");
  run->add_option("--series", a->series, "Aligned CSV (time_ms,tag,...)")->required()->check(CLI::ExistingFile);
  run->add_option("--config", a->config, "Detector config file")->check(CLI::ExistingFile);
  run->add_option("--labels", a->labels, "Ground-truth labels CSV")->check(CLI::ExistingFile);
  run->add_option("--out", a->out, "Directory for detections.csv and metrics.csv");
  run->callback([a] {
    const auto cfg = optional_config(a->config);
    const auto dc = detect::DetectorConfig::from_config(cfg);
    const auto table = historian::read_table_csv(a->series);
    const auto step_tags = split_list(cfg.get_string("zscore_tags", ""));
    const auto osc_tags = split_list(cfg.get_string("spectral_tags", ""));
    auto wanted = [](const std::vector<std::string>& list, const std::string& tag) {
      return list.empty() || std::find(list.begin(), list.end(), tag) != list.end();
    };

    std::vector<detect::Detection> all;
    for (const auto& s : detect::series_from_table(table)) {
      if (wanted(step_tags, s.tag)) {
        auto d = detect::zscore_detect(s, dc);
        all.insert(all.end(), d.begin(), d.end());
      }
      if (wanted(osc_tags, s.tag)) {
        auto d = detect::spectral_detect(s, dc);
        all.insert(all.end(), d.begin(), d.end());
      }
    }
    std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.t_ms < y.t_ms; });
    std::cout << all.size() << " detection(s)\n";
    for (const auto& d : all) {
      std::cout << "  " << d.t_ms << " " << d.tag << " " << detect::to_string(d.kind) << " score "
                << format_double(d.score);
      if (d.kind == detect::DetectionKind::Oscillation) std::cout << " at " << format_double(d.frequency_hz) << " Hz";
      std::cout << "\n";
    }
    if (!a->out.empty()) {
      fs::create_directories(a->out);
      detect::write_detections_csv(all, fs::path(a->out) / "detections.csv");
    }
    if (!a->labels.empty()) {
      const auto m = detect::evaluate({{all, read_labels_csv(a->labels)}}, cfg.get_int("grace_ms", 6400));
      std::cout << "detection_rate " << format_double(m.detection_rate) << " (" << m.detected_intervals << "/"
                << m.attack_intervals << ")\nfalse_alarm_rate " << format_double(m.false_alarm_rate) << " ("
                << m.false_detections << "/" << m.detections << ")\nmean_latency_ms "
                << format_double(m.mean_latency_ms) << "\n";
      if (!a->out.empty()) detect::write_metrics_csv(m, fs::path(a->out) / "metrics.csv");
    }
    std::cout << std::flush;
  });
}

void add_read(CLI::App& app) {
  struct Args {
    std::vector<std::string> tags;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
  };
  auto a = std::make_shared<Args>();
  auto* read = app.add_subcommand("read", "Read tags from a running component");
  read->add_option("tags", a->tags, "Tags; none sends STATUS")->delimiter(',');
  read->add_option("--host", a->host, "Component address");
  read->add_option("--port", a->port, "Component port")->required();
  read->callback([a] {
    tagbus::TagClient client(std::make_unique<tagbus::TcpLink>(a->host, a->port));
    const auto values = a->tags.empty() ? client.status() : client.read_tags(a->tags);
    for (const auto& [name, tv] : values) {
      std::cout << name << " ";
      if (auto d = tv.as_double()) {
        std::cout << format_double(*d);
      } else if (const auto* s = std::get_if<std::string>(&tv.value)) {
        std::cout << (s->find('\n') == std::string::npos ? *s : "<" + std::to_string(s->size()) + " bytes>");
      }
      std::cout << " " << tagbus::to_string(tv.quality) << " " << tv.timestamp_ms << "\n";
    }
    std::cout << std::flush;
  });
}

}  // namespace twinbed::cli
