#include "twinbed/detect/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "twinbed/common/log.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed::detect {

void DetectorConfig::validate() const {
  if (window < 8) throw ConfigError("window must be >= 8 samples");
  if (spectral_window < 8) throw ConfigError("spectral_window must be >= 8 samples");
  if (segment < 8 || segment > spectral_window) throw ConfigError("segment must lie in [8, spectral_window]");
  if (!(k_sigma > 0.0)) throw ConfigError("k_sigma must be > 0");
  if (!(peak_ratio_threshold > 0.0)) throw ConfigError("peak_ratio_threshold must be > 0");
  if (!(std_floor > 0.0)) throw ConfigError("std_floor must be > 0");
}

DetectorConfig DetectorConfig::from_config(const KeyValueConfig& cfg) {
  DetectorConfig c;
  c.window = static_cast<int>(cfg.get_int("window", c.window));
  c.k_sigma = cfg.get_double("k_sigma", c.k_sigma);
  c.std_floor = cfg.get_double("std_floor", c.std_floor);
  c.spectral_window = static_cast<int>(cfg.get_int("spectral_window", c.spectral_window));
  c.peak_ratio_threshold = cfg.get_double("peak_ratio_threshold", c.peak_ratio_threshold);
  c.segment = static_cast<int>(cfg.get_int("segment", std::min(c.segment, c.spectral_window)));
  c.min_peak_power = cfg.get_double("min_peak_power", c.min_peak_power);
  c.validate();
  return c;
}

std::string_view to_string(DetectionKind k) { return k == DetectionKind::Step ? "STEP" : "OSCILLATION"; }

Series series_from_samples(const std::string& tag, const std::vector<historian::Sample>& samples) {
  Series s;
  s.tag = tag;
  for (const auto& x : samples) {
    s.t_ms.push_back(x.t_ms);
    s.values.push_back(x.value);
  }
  return s;
}

std::vector<Series> series_from_table(const historian::AlignedTable& table) {
  std::vector<Series> out(table.columns.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].tag = table.columns[c];
    out[c].t_ms = table.times;
    out[c].values.reserve(table.rows.size());
    for (const auto& row : table.rows) out[c].values.push_back(row[c]);
  }
  return out;
}

std::vector<Detection> zscore_detect(const Series& s, const DetectorConfig& cfg) {
  cfg.validate();
  std::vector<Detection> out;
  const auto n = s.values.size();
  const auto w = static_cast<std::size_t>(cfg.window);
  if (n <= w) return out;
  for (std::size_t i = w; i < n; ++i) {
    // Two-pass over the window keeps the variance exact for large offsets.
    double mean = 0.0;
    for (std::size_t j = i - w; j < i; ++j) mean += s.values[j];
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t j = i - w; j < i; ++j) var += (s.values[j] - mean) * (s.values[j] - mean);
    var /= static_cast<double>(w - 1);
    const double sd = std::max(std::sqrt(var), cfg.std_floor);
    const double z = std::abs(s.values[i] - mean) / sd;
    if (z > cfg.k_sigma) out.push_back({s.tag, s.t_ms[i], DetectionKind::Step, z, 0.0});
  }
  return out;
}

Spectrum welch_spectrum(std::span<const double> x, int segment, double sample_rate_hz) {
  const auto m = static_cast<std::size_t>(segment);
  Spectrum sp;
  if (m < 4 || x.size() < m) return sp;
  const std::size_t hop = m / 2;
  const std::size_t bins = m / 2;
  std::vector<double> hann(m), cosv(m), sinv(m);
  for (std::size_t t = 0; t < m; ++t) {
    hann[t] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(m));
    cosv[t] = std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(m));
    sinv[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(m));
  }
  sp.power.assign(bins, 0.0);
  std::vector<double> seg(m);
  int count = 0;
  for (std::size_t start = 0; start + m <= x.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t t = 0; t < m; ++t) mean += x[start + t];
    mean /= static_cast<double>(m);
    for (std::size_t t = 0; t < m; ++t) seg[t] = (x[start + t] - mean) * hann[t];
    for (std::size_t b = 1; b <= bins; ++b) {
      double re = 0.0, im = 0.0;
      std::size_t phase = 0;
      for (std::size_t t = 0; t < m; ++t) {
        re += seg[t] * cosv[phase];
        im -= seg[t] * sinv[phase];
        phase = (phase + b) % m;
      }
      sp.power[b - 1] += re * re + im * im;
    }
    ++count;
  }
  for (auto& p : sp.power) p /= count;
  sp.freq_hz.resize(bins);
  for (std::size_t b = 1; b <= bins; ++b) {
    sp.freq_hz[b - 1] = static_cast<double>(b) * sample_rate_hz / static_cast<double>(m);
  }
  return sp;
}

PeakInfo spectral_peak(const Spectrum& s) {
  PeakInfo info;
  if (s.power.size() < 3) return info;
  const auto it = std::max_element(s.power.begin(), s.power.end());
  const auto k = static_cast<std::size_t>(it - s.power.begin());
  info.peak_power = *it;
  std::vector<double> sorted = s.power;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  info.ratio = median > 0.0 ? info.peak_power / median : std::numeric_limits<double>::infinity();

  // Gaussian interpolation between the neighbouring bins.
  const double df = s.freq_hz.size() > 1 ? s.freq_hz[1] - s.freq_hz[0] : 0.0;
  info.frequency_hz = s.freq_hz[k];
  if (k > 0 && k + 1 < s.power.size() && s.power[k - 1] > 0.0 && s.power[k + 1] > 0.0) {
    const double a = std::log(s.power[k - 1]);
    const double b = std::log(s.power[k]);
    const double c = std::log(s.power[k + 1]);
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) info.frequency_hz += 0.5 * (a - c) / denom * df;
  }
  return info;
}

std::vector<Detection> spectral_detect(const Series& s, const DetectorConfig& cfg) {
  cfg.validate();
  std::vector<Detection> out;
  const auto w = static_cast<std::size_t>(cfg.spectral_window);
  if (s.size() < w) return out;

  std::vector<std::int64_t> dts;
  for (std::size_t i = 1; i < s.t_ms.size(); ++i) dts.push_back(s.t_ms[i] - s.t_ms[i - 1]);
  std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
  const std::int64_t period = dts[dts.size() / 2];
  if (period <= 0) return out;
  const double rate = 1000.0 / static_cast<double>(period);

  const std::size_t hop = std::max<std::size_t>(1, w / 2);
  for (std::size_t start = 0; start + w <= s.size(); start += hop) {
    bool uniform = true;
    for (std::size_t i = start + 1; i < start + w; ++i) {
      if (s.t_ms[i] - s.t_ms[i - 1] != period) {
        uniform = false;
        break;
      }
    }
    if (!uniform) {
      log::info("detect", s.tag + ": spectral window at t=" + std::to_string(s.t_ms[start]) + " ms has gaps; skipped");
      continue;
    }
    auto sp = welch_spectrum(std::span<const double>(s.values).subspan(start, w), cfg.segment, rate);
    auto peak = spectral_peak(sp);
    if (peak.peak_power < cfg.min_peak_power) continue;
    if (peak.ratio > cfg.peak_ratio_threshold) {
      out.push_back({s.tag, s.t_ms[start + w - 1], DetectionKind::Oscillation, peak.ratio, peak.frequency_hz});
    }
  }
  return out;
}

Metrics evaluate(const std::vector<RunOutcome>& runs, std::int64_t grace_ms) {
  Metrics m;
  double latency_sum = 0.0;
  for (const auto& run : runs) {
    auto in_attack = [&](std::int64_t t) {
      return std::any_of(run.labels.begin(), run.labels.end(), [&](const LabeledInterval& iv) {
        return iv.attack && t >= iv.start_ms && t < iv.end_ms + grace_ms;
      });
    };
    for (const auto& d : run.detections) {
      ++m.detections;
      if (!in_attack(d.t_ms)) ++m.false_detections;
    }
    for (const auto& iv : run.labels) {
      if (!iv.attack) continue;
      ++m.attack_intervals;
      std::optional<std::int64_t> first;
      for (const auto& d : run.detections) {
        if (d.t_ms >= iv.start_ms && d.t_ms < iv.end_ms + grace_ms && (!first || d.t_ms < *first)) first = d.t_ms;
      }
      if (first) {
        ++m.detected_intervals;
        latency_sum += static_cast<double>(*first - iv.start_ms);
      }
    }
  }
  if (m.attack_intervals > 0) m.detection_rate = static_cast<double>(m.detected_intervals) / m.attack_intervals;
  if (m.detections > 0) m.false_alarm_rate = static_cast<double>(m.false_detections) / m.detections;
  if (m.detected_intervals > 0) m.mean_latency_ms = latency_sum / m.detected_intervals;
  return m;
}

void write_detections_csv(const std::vector<Detection>& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "tag,t_ms,kind,score,frequency_hz\n";
  for (const auto& x : d) {
    out << x.tag << ',' << x.t_ms << ',' << to_string(x.kind) << ',' << format_double(x.score) << ','
        << format_double(x.frequency_hz) << '\n';
  }
}

void write_metrics_csv(const Metrics& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "detection_rate,false_alarm_rate,mean_latency_ms,attack_intervals,detected_intervals,detections,"
         "false_detections\n";
  out << format_double(m.detection_rate) << ',' << format_double(m.false_alarm_rate) << ','
      << format_double(m.mean_latency_ms) << ',' << m.attack_intervals << ',' << m.detected_intervals << ','
      << m.detections << ',' << m.false_detections << '\n';
}

}  // namespace twinbed::detect
