#include "twinbed/testbed/testbed.hpp"

#include <stdexcept>

namespace twinbed::testbed {

namespace {
struct LinkName {
  LinkId id;
  const char* name;
};
constexpr LinkName kLinkNames[] = {
    {LinkId::PlcToPlant, "plc-plant"},           {LinkId::HistorianToPlc, "historian-plc"},
    {LinkId::HistorianToPlant, "historian-plant"}, {LinkId::TwinToHistorian, "twin-historian"},
    {LinkId::OperatorToPlant, "operator-plant"},   {LinkId::OperatorToPlc, "operator-plc"},
};
}  // namespace

std::string_view to_string(LinkId id) {
  for (const auto& l : kLinkNames) {
    if (l.id == id) return l.name;
  }
  return "?";
}

LinkId link_from_string(std::string_view s) {
  for (const auto& l : kLinkNames) {
    if (s == l.name) return l.id;
  }
  throw std::invalid_argument("unknown link " + std::string(s));
}

const std::vector<LinkId>& all_links() {
  static const std::vector<LinkId> ids = [] {
    std::vector<LinkId> v;
    for (const auto& l : kLinkNames) v.push_back(l.id);
    return v;
  }();
  return ids;
}

TestbedConfig TestbedConfig::defaults() {
  namespace pt = plant::tags;
  TestbedConfig c;
  for (const char* tag : {pt::kCwTemp, pt::kSgLevel, pt::kFwFlow, pt::kStFlow, pt::kFwValvePos, pt::kFwPumpOn,
                          pt::kFwValveCmd}) {
    c.historian_manifest.push_back({tag, historian::Source::Plc, 100});
    c.twin_manifest.push_back({tag, historian::Source::Plc, c.twin.poll_period_ms});
  }
  return c;
}

void TestbedConfig::validate() const {
  plant.validate();
  plc.validate();
  twin.validate();
  if (tick_ms <= 0) throw std::invalid_argument("tick_ms must be positive");
  if (plant.step_ms % tick_ms != 0 || plc.scan_period_ms % tick_ms != 0) {
    throw std::invalid_argument("plant step and PLC scan must be multiples of the tick");
  }
}

Testbed::Testbed(TestbedConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  plant_ = std::make_unique<plant::PlantSim>(cfg_.plant);
  plant_->set_control_owner(cfg_.control_owner);

  auto plant_handler = [this](const tagbus::Message& m) { return plant_->handle(m); };
  auto plc_handler = [this](const tagbus::Message& m) { return plc_->handle(m); };
  auto historian_handler = [this](const tagbus::Message& m) { return historian_->handle(m); };
  const auto timeout = cfg_.link_timeout_ms;
  links_[LinkId::PlcToPlant] = std::make_unique<tagbus::LoopbackLink>(plant_handler, timeout);
  links_[LinkId::HistorianToPlant] = std::make_unique<tagbus::LoopbackLink>(plant_handler, timeout);
  links_[LinkId::OperatorToPlant] = std::make_unique<tagbus::LoopbackLink>(plant_handler, timeout);
  links_[LinkId::HistorianToPlc] = std::make_unique<tagbus::LoopbackLink>(plc_handler, timeout);
  links_[LinkId::OperatorToPlc] = std::make_unique<tagbus::LoopbackLink>(plc_handler, timeout);
  links_[LinkId::TwinToHistorian] = std::make_unique<tagbus::LoopbackLink>(historian_handler, timeout);

  plc_ = std::make_unique<plc::PlcEmulator>(cfg_.plc, link(LinkId::PlcToPlant));
  historian_ = std::make_unique<historian::Historian>(
      cfg_.historian_manifest,
      std::map<historian::Source, tagbus::Link*>{{historian::Source::Plc, &link(LinkId::HistorianToPlc)},
                                                 {historian::Source::Plant, &link(LinkId::HistorianToPlant)}});
  twin_ = std::make_unique<twin::TwinMirror>(cfg_.twin_manifest, cfg_.twin, link(LinkId::TwinToHistorian));
}

tagbus::LoopbackLink& Testbed::link(LinkId id) { return *links_.at(id); }

void Testbed::tick() {
  if (started_ && now_ms_ % cfg_.plant.step_ms == 0) plant_->step();
  started_ = true;
  if (now_ms_ % cfg_.plc.scan_period_ms == 0) plc_->scan(now_ms_);
  historian_->poll_once(now_ms_);
  twin_->poll_update(now_ms_);
  for (const auto& fn : observers_) fn(*this);
  now_ms_ += cfg_.tick_ms;
}

void Testbed::run_until(std::int64_t t_ms) {
  while (now_ms_ < t_ms) tick();
}

}  // namespace twinbed::testbed
