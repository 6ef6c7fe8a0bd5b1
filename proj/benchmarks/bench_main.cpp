#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "twinbed/detect/detect.hpp"
#include "twinbed/plant/plant.hpp"
#include "twinbed/plc/plc.hpp"
#include "twinbed/raddose/dose.hpp"
#include "twinbed/rlnav/agent.hpp"
#include "twinbed/tagbus/frame.hpp"
#include "twinbed/testbed/testbed.hpp"

using namespace twinbed;

namespace {

tagbus::Message sample_reply(int tags) {
  auto m = tagbus::make_reply(tagbus::make_read(1, {}));
  for (int i = 0; i < tags; ++i) {
    const auto name = "TAG_" + std::to_string(i);
    m.reply[name] = tagbus::make_tag(name, 14.77 + i, 1000 + i);
  }
  return m;
}

void BM_EncodeFrame(benchmark::State& state) {
  const auto m = sample_reply(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tagbus::encode_frame(m));
}
BENCHMARK(BM_EncodeFrame)->Arg(1)->Arg(8)->Arg(64);

void BM_DecodeFrame(benchmark::State& state) {
  const auto bytes = tagbus::encode_frame(sample_reply(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(tagbus::decode_frame(bytes));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_DecodeFrame)->Arg(1)->Arg(8)->Arg(64);

void BM_PlantStep(benchmark::State& state) {
  plant::PlantSim sim;
  for (auto _ : state) {
    sim.step();
    benchmark::DoNotOptimize(sim.state());
  }
}
BENCHMARK(BM_PlantStep);

void BM_PlcScan(benchmark::State& state) {
  plant::PlantSim sim;
  sim.set_control_owner(plant::ControlOwner::External);
  sim.step();
  tagbus::LoopbackLink link([&](const tagbus::Message& m) { return sim.handle(m); });
  plc::PlcEmulator plc(plc::PlcConfig{}, link);
  std::int64_t now = 0;
  for (auto _ : state) benchmark::DoNotOptimize(plc.scan(now += 10));
}
BENCHMARK(BM_PlcScan);

void BM_TestbedSecond(benchmark::State& state) {
  testbed::Testbed bed(testbed::TestbedConfig::defaults());
  for (auto _ : state) bed.run_until(bed.now() + 1000);
}
BENCHMARK(BM_TestbedSecond)->Unit(benchmark::kMillisecond);

void BM_UpdateDose(benchmark::State& state) {
  raddose::RadiationSource s;
  s.voxel_size_m = 0.5;
  s.table = raddose::DoseTable(raddose::MeshDims{10, 10, 4});
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 4; ++k) s.table.set(i, j, k, 1e-4 / (1 + i + j + k));
  s.boundary_rate_sv_s = 2e-5;
  s.max_range_m = 20.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 15.0);
  std::vector<raddose::Vec3> points(1024);
  for (auto& p : points) p = {u(rng), u(rng), u(rng)};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(raddose::update_dose(s, points[i++ & 1023]));
}
BENCHMARK(BM_UpdateDose);

void BM_SpectralDetect(benchmark::State& state) {
  detect::Series s{"FW_VALVE_CMD", {}, {}};
  for (int i = 0; i < 1024; ++i) {
    s.t_ms.push_back(i * 10);
    s.values.push_back(0.5 + 0.02 * std::sin(2.0 * std::numbers::pi * i * 0.01));
  }
  detect::DetectorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(detect::spectral_detect(s, cfg));
}
BENCHMARK(BM_SpectralDetect)->Unit(benchmark::kMillisecond);

void BM_ZScoreDetect(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(14.77, 0.02);
  detect::Series s{"CW_TEMP", {}, {}};
  for (int i = 0; i < 6000; ++i) {
    s.t_ms.push_back(i * 100);
    s.values.push_back(n(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(detect::zscore_detect(s, {}));
}
BENCHMARK(BM_ZScoreDetect)->Unit(benchmark::kMillisecond);

void BM_MlpForward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  rlnav::Mlp net(54, 64, 4, rng);
  std::vector<float> x(54, 0.25f);
  std::array<double, 4> out{};
  for (auto _ : state) {
    net.forward(x, out);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_MlpForward);

void BM_LearnBatch(benchmark::State& state) {
  rlnav::TrainConfig cfg;
  rlnav::DoubleQLearner q(cfg, 54, 20, 20);
  std::vector<rlnav::DoubleQLearner::Transition> data(32);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& t : data) {
    t.s.resize(54);
    t.s2.resize(54);
    for (auto& v : t.s) v = u(rng);
    for (auto& v : t.s2) v = u(rng);
    t.a = static_cast<int>(rng() % 4);
    t.r = 0.01;
  }
  std::vector<const rlnav::DoubleQLearner::Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  for (auto _ : state) benchmark::DoNotOptimize(q.learn(batch, 0.99));
}
BENCHMARK(BM_LearnBatch);

}  // namespace
BENCHMARK_MAIN();
