#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "twinbed/detect/detect.hpp"

using namespace twinbed;
using namespace twinbed::detect;

namespace {

Series make_series(const std::string& tag, std::size_t n, std::int64_t period_ms,
                   const std::function<double(std::size_t)>& f) {
  Series s{tag, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    s.t_ms.push_back(static_cast<std::int64_t>(i) * period_ms);
    s.values.push_back(f(i));
  }
  return s;
}

}  // namespace

TEST(ZScore, ConstantSeriesSilent) {
  const auto s = make_series("CW_TEMP", 500, 100, [](std::size_t) { return 14.77; });
  EXPECT_TRUE(zscore_detect(s, {}).empty());
}

TEST(ZScore, StepDetectedAtStepSample) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.02);
  const auto s = make_series("CW_TEMP", 600, 100, [&](std::size_t i) { return i < 300 ? 14.77 + noise(rng) : 200.0; });
  const auto d = zscore_detect(s, {});
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d.front().t_ms, 300 * 100);
  EXPECT_GT(d.front().score, 6.0);
  EXPECT_EQ(d.front().kind, DetectionKind::Step);
}

TEST(ZScore, SlowRampInNoiseSilent) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.02);
  const auto s = make_series("X", 2000, 100, [&](std::size_t i) { return 14.77 + 1e-5 * i + noise(rng); });
  EXPECT_TRUE(zscore_detect(s, {}).empty());
}

TEST(ZScore, ShortSeriesSilent) {
  const auto s = make_series("X", 64, 100, [](std::size_t i) { return i == 63 ? 1e9 : 0.0; });
  EXPECT_TRUE(zscore_detect(s, {}).empty());
}

TEST(Spectral, WhiteNoiseFalsePositivesBelowOnePercent) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  DetectorConfig cfg;
  int fires = 0;
  for (int w = 0; w < 100; ++w) {
    const auto s = make_series("N", 1024, 10, [&](std::size_t) { return n01(rng); });
    fires += spectral_detect(s, cfg).empty() ? 0 : 1;
  }
  EXPECT_LT(fires, 1);
}

TEST(Spectral, OneHertzToneOnValveCommand) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 1e-4);
  const auto s = make_series("FW_VALVE_CMD", 1024, 10, [&](std::size_t i) {
    return 0.5 + 0.02 * std::sin(2.0 * std::numbers::pi * 1.0 * static_cast<double>(i) * 0.01) + noise(rng);
  });
  const auto d = spectral_detect(s, {});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].kind, DetectionKind::Oscillation);
  EXPECT_NEAR(d[0].frequency_hz, 1.0, 0.1);
  EXPECT_GT(d[0].score, 10.0);
}

TEST(Spectral, WindowWithGapSkipped) {
  auto s = make_series("X", 1024, 10,
                       [](std::size_t i) { return std::sin(2.0 * std::numbers::pi * static_cast<double>(i) * 0.01); });
  for (std::size_t i = 600; i < s.t_ms.size(); ++i) s.t_ms[i] += 500;
  EXPECT_TRUE(spectral_detect(s, {}).empty());
}

TEST(Spectral, WelchOfPureToneLandsOnBin) {
  // 256-sample segments at 100 Hz: bin 8 is 3.125 Hz.
  std::vector<double> x(1024);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(2.0 * std::numbers::pi * 3.125 * static_cast<double>(i) / 100.0);
  const auto sp = welch_spectrum(x, 256, 100.0);
  const auto p = spectral_peak(sp);
  EXPECT_NEAR(p.frequency_hz, 3.125, 1e-9);
}

TEST(DetectorConfig, Validation) {
  DetectorConfig c;
  c.window = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.spectral_window = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.k_sigma = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Evaluate, PerfectDetector) {
  std::vector<RunOutcome> runs;
  for (int r = 0; r < 10; ++r) {
    RunOutcome run;
    run.labels = {{0, 30000, false, ""}, {30000, 60000, true, "FDI_WRITE"}};
    run.detections = {{"CW_TEMP", 30000 + 100 * r, DetectionKind::Step, 100.0, 0.0}};
    runs.push_back(run);
  }
  const auto m = evaluate(runs, 6400);
  EXPECT_EQ(m.detection_rate, 1.0);
  EXPECT_EQ(m.false_alarm_rate, 0.0);
  EXPECT_DOUBLE_EQ(m.mean_latency_ms, 450.0);
}

TEST(Evaluate, MissedAttack) {
  RunOutcome run;
  run.labels = {{0, 30000, false, ""}, {30000, 60000, true, "FDI_WRITE"}};
  const auto m = evaluate({run}, 6400);
  EXPECT_EQ(m.detection_rate, 0.0);
  EXPECT_EQ(m.false_alarm_rate, 0.0);
}

TEST(Evaluate, GraceCoversLateDetections) {
  RunOutcome run;
  run.labels = {{0, 30000, false, ""}, {30000, 40000, true, "FDI_WRITE"}, {40000, 60000, false, ""}};
  run.detections = {{"X", 45000, DetectionKind::Step, 9.0, 0.0}, {"X", 50000, DetectionKind::Step, 9.0, 0.0}};
  const auto m = evaluate({run}, 6400);
  EXPECT_EQ(m.detection_rate, 1.0);
  EXPECT_EQ(m.false_detections, 1);
  EXPECT_DOUBLE_EQ(m.false_alarm_rate, 0.5);
}
