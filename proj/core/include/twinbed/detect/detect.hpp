#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/common/config.hpp"
#include "twinbed/common/labels.hpp"
#include "twinbed/historian/historian.hpp"

namespace twinbed::detect {

struct DetectorConfig {
  int window = 64;
  double k_sigma = 6.0;
  double std_floor = 1e-6;
  int spectral_window = 1024;
  double peak_ratio_threshold = 10.0;
  // Welch segment length inside each spectral window (50 % overlap).
  int segment = 256;
  // Windows whose peak power is below this are treated as flat and skipped.
  double min_peak_power = 1e-18;

  // Throws ConfigError.
  void validate() const;
  static DetectorConfig from_config(const KeyValueConfig& cfg);
};

enum class DetectionKind { Step, Oscillation };

std::string_view to_string(DetectionKind k);

struct Detection {
  std::string tag;
  std::int64_t t_ms = 0;
  DetectionKind kind = DetectionKind::Step;
  double score = 0.0;
  double frequency_hz = 0.0;  // oscillations only

  bool operator==(const Detection&) const = default;
};

struct Series {
  std::string tag;
  std::vector<std::int64_t> t_ms;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

Series series_from_samples(const std::string& tag, const std::vector<historian::Sample>& samples);
// One series per column of an aligned table.
std::vector<Series> series_from_table(const historian::AlignedTable& table);

// Flags samples whose deviation from the mean of the preceding `window`
// samples exceeds k_sigma rolling standard deviations.
std::vector<Detection> zscore_detect(const Series& s, const DetectorConfig& cfg);

struct Spectrum {
  std::vector<double> freq_hz;  // DC excluded
  std::vector<double> power;
};

// Welch estimate: Hann-windowed, mean-removed segments with 50 % overlap,
// bins from a direct DFT.
Spectrum welch_spectrum(std::span<const double> x, int segment, double sample_rate_hz);

struct PeakInfo {
  double ratio = 0.0;  // peak bin power over median bin power
  double frequency_hz = 0.0;
  double peak_power = 0.0;
};

PeakInfo spectral_peak(const Spectrum& s);

// Slides a spectral_window over the series with half-window hops. Windows
// containing sampling gaps are skipped.
std::vector<Detection> spectral_detect(const Series& s, const DetectorConfig& cfg);

struct RunOutcome {
  std::vector<Detection> detections;
  std::vector<LabeledInterval> labels;
};

struct Metrics {
  double detection_rate = 0.0;
  double false_alarm_rate = 0.0;
  double mean_latency_ms = 0.0;
  int attack_intervals = 0;
  int detected_intervals = 0;
  int detections = 0;
  int false_detections = 0;
};

// An attack interval counts as detected when a detection falls inside it or
// within `grace_ms` after its end. Detections outside every (graced) attack
// interval are false alarms; false_alarm_rate is their share of all detections.
Metrics evaluate(const std::vector<RunOutcome>& runs, std::int64_t grace_ms);

void write_detections_csv(const std::vector<Detection>& d, const std::filesystem::path& path);
void write_metrics_csv(const Metrics& m, const std::filesystem::path& path);

}  // namespace twinbed::detect
