#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace twinbed {

// Ground-truth interval [start_ms, end_ms) of a scenario run.
struct LabeledInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  bool attack = false;
  std::string source;  // attack actions active in the interval, '+'-joined

  bool contains(std::int64_t t_ms) const { return t_ms >= start_ms && t_ms < end_ms; }
  bool operator==(const LabeledInterval&) const = default;
};

// CSV columns: start_ms,end_ms,label,source  (label 1 = attack, 0 = benign)
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabeledInterval>& labels);
std::vector<LabeledInterval> read_labels_csv(const std::filesystem::path& path);

bool is_attack_time(const std::vector<LabeledInterval>& labels, std::int64_t t_ms);

}  // namespace twinbed
