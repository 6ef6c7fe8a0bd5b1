#include <gtest/gtest.h>

#include "twinbed/testbed/testbed.hpp"
#include "twinbed/twin/twin.hpp"

using namespace twinbed;
using namespace twinbed::twin;

namespace {

// Stands in for the historian: serves whatever the test stores.
struct FakeHistorian {
  std::map<std::string, tagbus::TagValue> values;
  tagbus::LoopbackLink link{[this](const tagbus::Message& m) {
    auto r = tagbus::make_reply(m);
    for (const auto& t : m.tags) {
      if (auto it = values.find(t); it != values.end()) r.reply[t] = it->second;
    }
    return r;
  }};
};

historian::SensorManifest watch(std::initializer_list<const char*> tags) {
  historian::SensorManifest m;
  for (const auto* t : tags) m.push_back({t, historian::Source::Plc, 250});
  return m;
}

}  // namespace

TEST(TwinManifest, ThreeRowsThreeVars) {
  const auto m = historian::parse_manifest("tag,source,period_ms\nCW_TEMP,PLC,250\nSG_LEVEL,PLC,250\nFW_PUMP_ON,PLC,250\n");
  FakeHistorian h;
  TwinMirror twin(m, TwinConfig::defaults(), h.link);
  EXPECT_EQ(twin.watched().size(), 3u);
  EXPECT_THROW(historian::parse_manifest("tag,source,period_ms\nA,PLC,250\nA,PLC,250\n"), historian::ManifestError);
}

TEST(TwinMirror, MirrorsAfterFirstPoll) {
  FakeHistorian h;
  TwinMirror twin(watch({"CW_TEMP"}), TwinConfig::defaults(), h.link);
  EXPECT_EQ(twin.get("CW_TEMP").age_ms, -1);
  h.values["CW_TEMP"] = tagbus::make_tag("CW_TEMP", 14.77, 100);
  EXPECT_TRUE(twin.poll_update(100));
  const auto v = twin.get("CW_TEMP");
  EXPECT_EQ(v.value, 14.77);
  EXPECT_EQ(v.status, Freshness::Fresh);
  EXPECT_THROW(twin.get("NOPE"), historian::UnknownTag);
}

TEST(TwinMirror, PollsOnPeriod) {
  FakeHistorian h;
  TwinMirror twin(watch({"X"}), TwinConfig::defaults(), h.link);
  EXPECT_TRUE(twin.poll_update(0));
  EXPECT_FALSE(twin.poll_update(100));
  EXPECT_TRUE(twin.poll_update(250));
}

TEST(TwinMirror, StaleAfterHistorianDown) {
  FakeHistorian h;
  TwinMirror twin(watch({"X"}), TwinConfig::defaults(), h.link);
  h.values["X"] = tagbus::make_tag("X", 1.0, 0);
  twin.poll_update(0);
  h.link.set_down(true);
  for (std::int64_t t = 250; t <= 5 * 250; t += 250) EXPECT_NO_THROW(twin.poll_update(t));
  EXPECT_EQ(twin.get("X").status, Freshness::Stale);
  EXPECT_EQ(twin.get("X").value, 1.0);
}

TEST(TwinMirror, FdiVisibleWithinTwoPolls) {
  testbed::Testbed bed(testbed::TestbedConfig::defaults());
  bed.run_until(10000);
  EXPECT_NEAR(bed.twin().get("CW_TEMP").value, 14.77, 0.1);
  bed.plant().apply_command("CW_TEMP", 200.0);
  bed.run_until(10000 + 2 * 250);
  EXPECT_EQ(bed.twin().get("CW_TEMP").value, 200.0);
}

TEST(TwinMirror, NominalRunStaysInNoiseBand) {
  testbed::Testbed bed(testbed::TestbedConfig::defaults());
  double lo = 1e9, hi = -1e9;
  bed.add_observer([&](const testbed::Testbed& b) {
    const auto v = b.twin().get("CW_TEMP");
    if (v.age_ms < 0) return;
    lo = std::min(lo, v.value);
    hi = std::max(hi, v.value);
  });
  bed.run_until(60000);
  EXPECT_GE(lo, 14.77 - 0.1);
  EXPECT_LE(hi, 14.77 + 0.1);
}

TEST(StatusEncoding, PumpRunningIsRed) {
  const auto e = encode(ComponentKind::PumpOrValve, 1.0, {});
  EXPECT_EQ(e.color, OnOff::RedRunningOpen);
  EXPECT_EQ(encode(ComponentKind::PumpOrValve, 0.0, {}).color, OnOff::GreenSecuredShut);
}

TEST(StatusEncoding, GradientClampsToRange) {
  EXPECT_EQ(encode(ComponentKind::Thermal, 200.0, {0.0, 100.0}).gradient, 1.0);
  EXPECT_EQ(encode(ComponentKind::Thermal, 0.0, {0.0, 100.0}).gradient, 0.0);
  EXPECT_DOUBLE_EQ(*encode(ComponentKind::Thermal, 25.0, {0.0, 100.0}).gradient, 0.25);
}

TEST(StatusEncoding, TwinUsesConfiguredKinds) {
  FakeHistorian h;
  h.values["FW_PUMP_ON"] = tagbus::make_tag("FW_PUMP_ON", true, 0);
  h.values["CW_TEMP"] = tagbus::make_tag("CW_TEMP", 200.0, 0);
  TwinMirror twin(watch({"FW_PUMP_ON", "CW_TEMP"}), TwinConfig::defaults(), h.link);
  twin.poll_now(0);
  EXPECT_EQ(twin.status_encoding("FW_PUMP_ON").color, OnOff::RedRunningOpen);
  EXPECT_EQ(twin.status_encoding("CW_TEMP").gradient, 1.0);
}

TEST(TwinConfig, RejectsInvertedRange) {
  auto cfg = TwinConfig::defaults();
  cfg.ranges["CW_TEMP"] = {10.0, 5.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
}
