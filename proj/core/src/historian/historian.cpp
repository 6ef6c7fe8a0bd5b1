#include "twinbed/historian/historian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include "twinbed/common/csv.hpp"
#include "twinbed/common/log.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed::historian {

std::string_view to_string(Source s) { return s == Source::Plc ? "PLC" : "PLANT"; }

SensorManifest parse_manifest(std::string_view text) {
  CsvTable table;
  try {
    table = parse_csv(text);
  } catch (const CsvError& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  }
  if (table.header != std::vector<std::string>{"tag", "source", "period_ms"}) {
    throw ManifestError("manifest line 1: header must be tag,source,period_ms");
  }
  SensorManifest out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = "manifest line " + std::to_string(table.line_numbers[r]) + ": ";
    if (row.size() != 3) throw ManifestError(where + "expected 3 columns");
    SensorManifestEntry e;
    e.tag = row[0];
    if (e.tag.empty()) throw ManifestError(where + "empty tag");
    if (row[1] == "PLC") {
      e.source = Source::Plc;
    } else if (row[1] == "PLANT") {
      e.source = Source::Plant;
    } else {
      throw ManifestError(where + "source must be PLC or PLANT");
    }
    auto period = parse_int(row[2]);
    if (!period) throw ManifestError(where + "period_ms is not an integer");
    if (*period < 10) throw ManifestError(where + "period_ms must be >= 10");
    e.period_ms = *period;
    if (!seen.insert(e.tag).second) throw ManifestError(where + "duplicate tag " + e.tag);
    out.push_back(std::move(e));
  }
  return out;
}

SensorManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text);
}

SeriesStore::SeriesStore(const SeriesStore& other) {
  std::shared_lock lock(other.mutex_);
  series_ = other.series_;
}

SeriesStore& SeriesStore::operator=(const SeriesStore& other) {
  if (this == &other) return *this;
  std::map<std::string, std::vector<Sample>> copy;
  {
    std::shared_lock lock(other.mutex_);
    copy = other.series_;
  }
  std::unique_lock lock(mutex_);
  series_ = std::move(copy);
  return *this;
}

bool SeriesStore::append(const std::string& tag, const Sample& s) {
  std::unique_lock lock(mutex_);
  auto& series = series_[tag];
  if (!series.empty() && s.t_ms <= series.back().t_ms) return false;
  series.push_back(s);
  return true;
}

void SeriesStore::declare(const std::string& tag) {
  std::unique_lock lock(mutex_);
  series_[tag];
}

bool SeriesStore::contains(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  return series_.count(tag) != 0;
}

std::vector<std::string> SeriesStore::tags() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, v] : series_) out.push_back(k);
  return out;
}

std::size_t SeriesStore::size(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(tag);
  if (it == series_.end()) throw UnknownTag("unknown series " + tag);
  return it->second.size();
}

std::vector<Sample> SeriesStore::query_range(const std::string& tag, std::int64_t t0, std::int64_t t1) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(tag);
  if (it == series_.end()) throw UnknownTag("unknown series " + tag);
  const auto& s = it->second;
  if (t1 <= t0) return {};
  auto by_time = [](const Sample& a, std::int64_t t) { return a.t_ms < t; };
  auto lo = std::lower_bound(s.begin(), s.end(), t0, by_time);
  auto hi = std::lower_bound(lo, s.end(), t1, by_time);
  return {lo, hi};
}

std::optional<Sample> SeriesStore::latest(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(tag);
  if (it == series_.end()) throw UnknownTag("unknown series " + tag);
  if (it->second.empty()) return std::nullopt;
  return it->second.back();
}

void SeriesStore::save_snapshot(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::shared_lock lock(mutex_);
  for (const auto& [tag, series] : series_) {
    std::ofstream out(dir / (tag + ".csv"));
    if (!out) throw CsvError("cannot write snapshot for " + tag);
    out << "t_ms,value,quality\n";
    for (const auto& s : series) {
      out << s.t_ms << ',' << format_double(s.value) << ',' << tagbus::to_string(s.quality) << '\n';
    }
  }
}

SeriesStore SeriesStore::load_snapshot(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw CsvError("snapshot directory not found: " + dir.string());
  SeriesStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    const auto tag = entry.path().stem().string();
    auto table = read_csv(entry.path());
    const auto c_t = table.column("t_ms");
    const auto c_v = table.column("value");
    const auto c_q = table.column("quality");
    store.declare(tag);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      auto t = parse_int(row.at(c_t));
      auto v = parse_double(row.at(c_v));
      auto q = tagbus::quality_from_string(row.at(c_q));
      if (!t || !v || !q) {
        throw CsvError(entry.path().string() + " line " + std::to_string(table.line_numbers[r]) + ": bad sample");
      }
      store.append(tag, Sample{*t, *v, *q});
    }
  }
  return store;
}

Historian::Historian(SensorManifest manifest, std::map<Source, tagbus::Link*> sources)
    : manifest_(std::move(manifest)), last_polled_(manifest_.size()) {
  for (auto& [src, link] : sources) {
    if (link) clients_.emplace(src, tagbus::TagClient(*link));
  }
  for (const auto& e : manifest_) store_.declare(e.tag);
}

PollStats Historian::poll_once(std::int64_t now_ms) {
  PollStats stats;
  std::map<Source, std::vector<std::size_t>> due;
  for (std::size_t i = 0; i < manifest_.size(); ++i) {
    const auto& last = last_polled_[i];
    if (!last || now_ms - *last >= manifest_[i].period_ms) due[manifest_[i].source].push_back(i);
  }
  for (auto& [src, indices] : due) {
    for (auto i : indices) last_polled_[i] = now_ms;
    auto client = clients_.find(src);
    if (client == clients_.end()) {
      ++stats.failures;
      gaps_.push_back({src, now_ms});
      continue;
    }
    std::vector<std::string> names;
    for (auto i : indices) names.push_back(manifest_[i].tag);
    ++stats.reads;
    std::map<std::string, tagbus::TagValue> values;
    try {
      values = client->second.read_tags(names);
    } catch (const std::exception& e) {
      ++stats.failures;
      gaps_.push_back({src, now_ms});
      log::debug("historian", std::string("poll of ") + std::string(to_string(src)) + " failed: " + e.what());
      continue;
    }
    for (const auto& name : names) {
      auto it = values.find(name);
      if (it == values.end()) continue;
      auto v = it->second.as_double();
      if (!v) continue;
      if (store_.append(name, Sample{it->second.timestamp_ms, *v, it->second.quality})) {
        ++stats.appended;
      } else {
        ++stats.duplicates;
      }
    }
  }
  return stats;
}

tagbus::Message Historian::handle(const tagbus::Message& request) const {
  auto reply = tagbus::make_reply(request);
  switch (request.op) {
    case tagbus::Op::Read:
      for (const auto& t : request.tags) {
        auto s = store_.latest(t);
        if (!s) continue;
        reply.reply[t] = tagbus::make_tag(t, s->value, s->t_ms, s->quality);
      }
      break;
    case tagbus::Op::Status:
      reply.reply["SERIES"] =
          tagbus::make_tag("SERIES", static_cast<std::int64_t>(store_.tags().size()), 0);
      break;
    case tagbus::Op::Write:
      throw std::runtime_error("historian is read-only");
    case tagbus::Op::SubscribePoll:
      throw std::runtime_error("SUBSCRIBE_POLL is reserved and not implemented");
  }
  return reply;
}

AlignedTable align(const SeriesStore& store, const std::vector<std::string>& tags, std::int64_t t0, std::int64_t t1) {
  if (tags.empty()) throw EmptyDataset("no tags selected");
  AlignedTable table;
  table.columns = tags;
  std::vector<std::vector<Sample>> history;  // samples before t1, including carry-in
  std::set<std::int64_t> times;
  for (const auto& tag : tags) {
    auto all = store.query_range(tag, std::numeric_limits<std::int64_t>::min(), t1);
    for (const auto& s : all) {
      if (s.t_ms >= t0) times.insert(s.t_ms);
    }
    history.push_back(std::move(all));
  }
  std::vector<std::size_t> cursor(tags.size(), 0);
  for (auto t : times) {
    std::vector<double> row(tags.size());
    bool complete = true;
    for (std::size_t c = 0; c < tags.size(); ++c) {
      const auto& h = history[c];
      while (cursor[c] < h.size() && h[cursor[c]].t_ms <= t) ++cursor[c];
      if (cursor[c] == 0) {
        complete = false;
        break;
      }
      row[c] = h[cursor[c] - 1].value;
    }
    if (!complete) continue;
    table.times.push_back(t);
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw EmptyDataset("selected tags have no overlapping coverage in range");
  return table;
}

void write_table_csv(const AlignedTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write " + path.string());
  out << "time_ms";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out << table.times[r];
    for (double v : table.rows[r]) out << ',' << format_double(v);
    out << '\n';
  }
}

AlignedTable read_table_csv(const std::filesystem::path& path) {
  auto csv = read_csv(path);
  if (csv.header.empty() || csv.header[0] != "time_ms") throw CsvError(path.string() + ": first column must be time_ms");
  AlignedTable table;
  table.columns.assign(csv.header.begin() + 1, csv.header.end());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.size() != csv.header.size()) {
      throw CsvError(path.string() + " line " + std::to_string(csv.line_numbers[r]) + ": wrong column count");
    }
    auto t = parse_int(row[0]);
    if (!t) throw CsvError(path.string() + " line " + std::to_string(csv.line_numbers[r]) + ": bad time");
    std::vector<double> values;
    for (std::size_t c = 1; c < row.size(); ++c) {
      auto v = parse_double(row[c]);
      if (!v) throw CsvError(path.string() + " line " + std::to_string(csv.line_numbers[r]) + ": bad value");
      values.push_back(*v);
    }
    table.times.push_back(*t);
    table.rows.push_back(std::move(values));
  }
  return table;
}

void export_csv(const SeriesStore& store, const std::vector<std::string>& tags, std::int64_t t0, std::int64_t t1,
                const std::filesystem::path& path) {
  write_table_csv(align(store, tags, t0, t1), path);
}

DatasetBundle build_dataset(AlignedTable table, const std::vector<LabeledInterval>* labels,
                            const SplitFractions& splits) {
  const double sum = splits.train + splits.val + splits.test;
  if (splits.train < 0 || splits.val < 0 || splits.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
  if (table.rows.empty()) throw EmptyDataset("dataset has no rows");
  DatasetBundle b;
  const std::size_t n = table.rows.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * splits.train));
  const auto n_val =
      std::min(n - std::min(n, n_train), static_cast<std::size_t>(std::llround(static_cast<double>(n) * splits.val)));
  b.train = {0, std::min(n, n_train)};
  b.val = {b.train.end, b.train.end + n_val};
  b.test = {b.val.end, n};
  if (labels) {
    std::vector<int> y;
    y.reserve(n);
    for (auto t : table.times) y.push_back(is_attack_time(*labels, t) ? 1 : 0);
    b.labels = std::move(y);
  }
  b.table = std::move(table);
  return b;
}

DatasetBundle build_dataset(const SeriesStore& store, const std::vector<std::string>& tags,
                            const std::vector<LabeledInterval>* labels, const SplitFractions& splits,
                            std::int64_t t0, std::int64_t t1) {
  return build_dataset(align(store, tags, t0, t1), labels, splits);
}

}  // namespace twinbed::historian
