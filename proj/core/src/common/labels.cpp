#include "twinbed/common/labels.hpp"

#include <fstream>

#include "twinbed/common/csv.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed {

void write_labels_csv(const std::filesystem::path& path, const std::vector<LabeledInterval>& labels) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write " + path.string());
  out << "start_ms,end_ms,label,source\n";
  for (const auto& l : labels) {
    out << l.start_ms << ',' << l.end_ms << ',' << (l.attack ? 1 : 0) << ',' << l.source << '\n';
  }
}

std::vector<LabeledInterval> read_labels_csv(const std::filesystem::path& path) {
  auto table = read_csv(path);
  const auto c_start = table.column("start_ms");
  const auto c_end = table.column("end_ms");
  const auto c_label = table.column("label");
  std::vector<LabeledInterval> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() < 3) throw CsvError("labels line " + std::to_string(table.line_numbers[r]) + ": too few columns");
    auto s = parse_int(row[c_start]);
    auto e = parse_int(row[c_end]);
    auto l = parse_int(row[c_label]);
    if (!s || !e || !l) throw CsvError("labels line " + std::to_string(table.line_numbers[r]) + ": bad number");
    LabeledInterval li{*s, *e, *l != 0, row.size() > 3 ? row[3] : std::string{}};
    out.push_back(std::move(li));
  }
  return out;
}

bool is_attack_time(const std::vector<LabeledInterval>& labels, std::int64_t t_ms) {
  for (const auto& l : labels) {
    if (l.attack && l.contains(t_ms)) return true;
  }
  return false;
}

}  // namespace twinbed
