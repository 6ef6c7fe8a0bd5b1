#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/common/labels.hpp"
#include "twinbed/tagbus/link.hpp"

namespace twinbed::historian {

class UnknownTag : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EmptyDataset : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  std::int64_t t_ms = 0;
  double value = 0.0;
  tagbus::Quality quality = tagbus::Quality::Good;

  bool operator==(const Sample&) const = default;
};

enum class Source { Plc, Plant };

std::string_view to_string(Source s);

struct SensorManifestEntry {
  std::string tag;
  Source source = Source::Plc;
  std::int64_t period_ms = 100;
};

using SensorManifest = std::vector<SensorManifestEntry>;

// CSV with header `tag,source,period_ms`. Throws ManifestError naming the
// offending line for malformed rows, duplicate tags or periods below 10 ms.
SensorManifest parse_manifest(std::string_view text);
SensorManifest load_manifest(const std::filesystem::path& path);

// In-memory per-series store. One writer, many readers; each query sees a
// consistent snapshot. Series timestamps are strictly increasing: samples at
// or before the series' last timestamp are rejected.
class SeriesStore {
 public:
  SeriesStore() = default;
  SeriesStore(const SeriesStore& other);
  SeriesStore& operator=(const SeriesStore& other);

  // Returns false if the sample was a duplicate or out of order.
  bool append(const std::string& tag, const Sample& s);
  // Registers a series with no samples yet.
  void declare(const std::string& tag);

  bool contains(const std::string& tag) const;
  std::vector<std::string> tags() const;
  std::size_t size(const std::string& tag) const;

  // Samples with t0 <= t < t1, ascending. Throws UnknownTag.
  std::vector<Sample> query_range(const std::string& tag, std::int64_t t0, std::int64_t t1) const;
  // Most recent sample, if any. Throws UnknownTag.
  std::optional<Sample> latest(const std::string& tag) const;

  // One CSV per series (`t_ms,value,quality`) in `dir`.
  void save_snapshot(const std::filesystem::path& dir) const;
  static SeriesStore load_snapshot(const std::filesystem::path& dir);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::vector<Sample>> series_;
};

struct PollStats {
  int reads = 0;
  int appended = 0;
  int duplicates = 0;
  int failures = 0;
};

struct PollGap {
  Source source;
  std::int64_t t_ms;
};

// Polls the tags named in the manifest from their sources, one READ per
// source per tick, and answers tagbus READs with the latest stored sample.
class Historian {
 public:
  Historian(SensorManifest manifest, std::map<Source, tagbus::Link*> sources);

  // Polls every manifest entry whose period has elapsed at `now_ms`.
  PollStats poll_once(std::int64_t now_ms);

  SeriesStore& store() { return store_; }
  const SeriesStore& store() const { return store_; }
  const SensorManifest& manifest() const { return manifest_; }
  const std::vector<PollGap>& gaps() const { return gaps_; }

  // READ answers with the latest sample per tag; series without samples are
  // left out of the reply, undeclared tags are an error.
  tagbus::Message handle(const tagbus::Message& request) const;

 private:
  SensorManifest manifest_;
  std::map<Source, tagbus::TagClient> clients_;
  std::vector<std::optional<std::int64_t>> last_polled_;
  SeriesStore store_;
  std::vector<PollGap> gaps_;
};

// Rows aligned on the union of sample timestamps in [t0, t1); each column
// carries its last observation at or before the row time. Rows before every
// column has a value are omitted.
struct AlignedTable {
  std::vector<std::string> columns;
  std::vector<std::int64_t> times;
  std::vector<std::vector<double>> rows;
};

// Throws EmptyDataset when the tags share no time coverage.
AlignedTable align(const SeriesStore& store, const std::vector<std::string>& tags, std::int64_t t0, std::int64_t t1);

// Header `time_ms,tag1,...`.
void write_table_csv(const AlignedTable& table, const std::filesystem::path& path);
AlignedTable read_table_csv(const std::filesystem::path& path);
void export_csv(const SeriesStore& store, const std::vector<std::string>& tags, std::int64_t t0, std::int64_t t1,
                const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Time-ordered, disjoint, contiguous splits over an aligned table.
struct DatasetBundle {
  AlignedTable table;
  std::optional<std::vector<int>> labels;
  RowRange train, val, test;
};

DatasetBundle build_dataset(const SeriesStore& store, const std::vector<std::string>& tags,
                            const std::vector<LabeledInterval>* labels, const SplitFractions& splits,
                            std::int64_t t0, std::int64_t t1);
DatasetBundle build_dataset(AlignedTable table, const std::vector<LabeledInterval>* labels,
                            const SplitFractions& splits);

}  // namespace twinbed::historian
