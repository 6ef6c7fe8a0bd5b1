#include "twinbed/raddose/dose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "twinbed/common/csv.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed::raddose {

DoseTable::DoseTable(MeshDims dims) : dims_(dims) {
  if (dims.i < 1 || dims.j < 1 || dims.k < 1) throw TableError("mesh dimensions must be >= 1");
  rates_.assign(dims.count(), 0.0);
  present_.assign(dims.count(), false);
}

std::size_t DoseTable::index(int i, int j, int k) const {
  return (static_cast<std::size_t>(i) * dims_.j + j) * dims_.k + k;
}

void DoseTable::set(int i, int j, int k, double sv_s, std::string) {
  if (!dims_.contains(i, j, k)) throw TableError("voxel index outside mesh dimensions");
  if (!std::isfinite(sv_s) || sv_s < 0.0) throw TableError("dose rate must be finite and >= 0");
  const auto n = index(i, j, k);
  if (present_[n]) throw TableError("duplicate voxel row");
  rates_[n] = sv_s;
  present_[n] = true;
  ++rows_;
}

double DoseTable::rate_sv_s(int i, int j, int k) const {
  if (!dims_.contains(i, j, k)) return 0.0;
  return rates_[index(i, j, k)];
}

bool DoseTable::has_row(int i, int j, int k) const { return dims_.contains(i, j, k) && present_[index(i, j, k)]; }

DoseTable parse_dose_table(std::string_view text, MeshDims dims) {
  CsvTable csv;
  try {
    csv = parse_csv(text);
  } catch (const CsvError& e) {
    throw TableError(e.what());
  }
  if (csv.header != std::vector<std::string>{"name", "i", "j", "k", "sv_s", "sv_hr"}) {
    throw TableError("dose table header must be name,i,j,k,sv_s,sv_hr");
  }
  DoseTable table(dims);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const auto where = "dose table line " + std::to_string(csv.line_numbers[r]) + ": ";
    if (row.size() != 6) throw TableError(where + "expected 6 columns");
    auto i = parse_int(row[1]);
    auto j = parse_int(row[2]);
    auto k = parse_int(row[3]);
    auto sv_s = parse_double(row[4]);
    auto sv_hr = parse_double(row[5]);
    if (!i || !j || !k || !sv_s || !sv_hr) throw TableError(where + "unparsable field");
    const double expect = kSecondsPerHour * *sv_s;
    if (std::abs(*sv_hr - expect) > 1e-9 * std::max(std::abs(*sv_hr), std::abs(expect))) {
      throw TableError(where + "sv_hr is not 3600 x sv_s");
    }
    try {
      table.set(static_cast<int>(*i), static_cast<int>(*j), static_cast<int>(*k), *sv_s, row[0]);
    } catch (const TableError& e) {
      throw TableError(where + e.what());
    }
  }
  return table;
}

DoseTable load_dose_table(const std::filesystem::path& path, MeshDims dims) {
  std::ifstream in(path);
  if (!in) throw TableError("cannot open dose table " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_dose_table(text, dims);
}

Vec3 RadiationSource::half_extent() const {
  const auto& d = dims();
  return {0.5 * d.i * voxel_size_m, 0.5 * d.j * voxel_size_m, 0.5 * d.k * voxel_size_m};
}

Vec3 RadiationSource::center() const {
  const auto h = half_extent();
  return {origin.x + h.x, origin.y + h.y, origin.z + h.z};
}

void RadiationSource::validate() const {
  if (!(voxel_size_m > 0.0)) throw std::invalid_argument("voxel_size_m must be > 0");
  if (!(halving_distance_m > 0.0)) throw std::invalid_argument("halving_distance_m must be > 0");
  if (!(boundary_rate_sv_s >= 0.0)) throw std::invalid_argument("boundary_rate_sv_s must be >= 0");
  const auto h = half_extent();
  const double half_diag = std::sqrt(h.x * h.x + h.y * h.y + h.z * h.z);
  if (!(max_range_m >= half_diag)) throw std::invalid_argument("max_range_m must cover the mesh");
}

RadiationSource RadiationSource::from_config(const KeyValueConfig& cfg, const std::filesystem::path& base_dir) {
  RadiationSource s;
  s.origin = {cfg.get_double("origin_x", 0.0), cfg.get_double("origin_y", 0.0), cfg.get_double("origin_z", 0.0)};
  s.voxel_size_m = cfg.get_double("voxel_size_m", s.voxel_size_m);
  MeshDims dims{static_cast<int>(cfg.get_int("dims_i", 1)), static_cast<int>(cfg.get_int("dims_j", 1)),
                static_cast<int>(cfg.get_int("dims_k", 1))};
  if (cfg.has("table")) {
    std::filesystem::path p = cfg.require_string("table");
    if (p.is_relative()) p = base_dir / p;
    s.table = load_dose_table(p, dims);
  } else {
    s.table = DoseTable(dims);
  }
  s.halving_distance_m = cfg.get_double("halving_distance_m", s.halving_distance_m);
  s.boundary_rate_sv_s = cfg.get_double("boundary_rate_sv_s", s.boundary_rate_sv_s);
  s.max_range_m = cfg.get_double("max_range_m", s.max_range_m);
  const auto mode = cfg.get_string("boundary_mode", "configured");
  if (mode == "configured") {
    s.boundary_mode = BoundaryRate::Configured;
  } else if (mode == "boundary_voxel") {
    s.boundary_mode = BoundaryRate::BoundaryVoxel;
  } else {
    throw ConfigError(cfg.origin() + ": boundary_mode must be configured or boundary_voxel");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.origin() + ": " + e.what());
  }
  return s;
}

std::string_view to_string(Zone z) {
  switch (z) {
    case Zone::InMesh:
      return "IN_MESH";
    case Zone::Approx:
      return "APPROX_ZONE";
    case Zone::Out:
      return "OUT";
  }
  return "OUT";
}

double boundary_distance(const Vec3& h, const Vec3& u) {
  double best = std::numeric_limits<double>::infinity();
  if (u.x != 0.0) best = std::min(best, h.x / std::abs(u.x));
  if (u.y != 0.0) best = std::min(best, h.y / std::abs(u.y));
  if (u.z != 0.0) best = std::min(best, h.z / std::abs(u.z));
  return std::isfinite(best) ? best : 0.0;
}

double halving_rate(double boundary_rate, double distance, double boundary_distance, double halving_distance) {
  return boundary_rate * std::exp2(-(distance - boundary_distance) / halving_distance);
}

DoseEvaluation evaluate_dose(const RadiationSource& src, const Vec3& pos) {
  if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !std::isfinite(pos.z)) {
    throw InvalidPosition("dosimeter position must be finite");
  }
  DoseEvaluation ev;
  const auto& dims = src.dims();

  // Stage 1: voxel relative to the mesh corner.
  auto cell = [&](double p, double o) {
    return static_cast<int>(std::clamp(std::floor((p - o) / src.voxel_size_m), -1e9, 1e9));
  };
  ev.voxel = {cell(pos.x, src.origin.x), cell(pos.y, src.origin.y), cell(pos.z, src.origin.z)};
  const bool in_mesh = dims.contains(ev.voxel[0], ev.voxel[1], ev.voxel[2]);

  // Stage 2: distance from the center and bounding.
  const auto c = src.center();
  const Vec3 d{pos.x - c.x, pos.y - c.y, pos.z - c.z};
  ev.distance_m = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  if (ev.distance_m > src.max_range_m) {
    ev.zone = Zone::Out;
    return ev;
  }
  ev.zone = in_mesh ? Zone::InMesh : Zone::Approx;
  Vec3 u{};
  if (ev.distance_m > 0.0) u = {d.x / ev.distance_m, d.y / ev.distance_m, d.z / ev.distance_m};
  const auto h = src.half_extent();
  ev.boundary_distance_m = boundary_distance(h, u);

  // Stage 3: table lookup.
  if (in_mesh) ev.table_rate_sv_s = src.table.rate_sv_s(ev.voxel[0], ev.voxel[1], ev.voxel[2]);

  // Stage 4: approximation from the boundary rate.
  double boundary_rate = src.boundary_rate_sv_s;
  if (src.boundary_mode == BoundaryRate::BoundaryVoxel) {
    // Voxel containing the exit point of the ray, nudged inward.
    const double s = ev.boundary_distance_m * (1.0 - 1e-9);
    auto voxel_at = [&](double half, double comp, int n) {
      return std::clamp(static_cast<int>(std::floor((half + comp * s) / src.voxel_size_m)), 0, n - 1);
    };
    const int bi = voxel_at(h.x, u.x, dims.i);
    const int bj = voxel_at(h.y, u.y, dims.j);
    const int bk = voxel_at(h.z, u.z, dims.k);
    boundary_rate = src.table.rate_sv_s(bi, bj, bk);
  }
  ev.approx_rate_sv_s =
      halving_rate(boundary_rate, ev.distance_m, ev.boundary_distance_m, src.halving_distance_m);

  ev.rate_sv_s = (in_mesh && ev.table_rate_sv_s > 0.0) ? ev.table_rate_sv_s : ev.approx_rate_sv_s;
  return ev;
}

double update_dose(const RadiationSource& source, const Vec3& pos) { return evaluate_dose(source, pos).rate_sv_s; }

Dosimeter dosimeter_tick(const Dosimeter& d, const RadiationSource& source, double dt_s) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("dt_s must be > 0");
  const double rate = update_dose(source, d.position);
  Dosimeter out = d;
  out.cumulative_dose_sv += rate * dt_s;
  out.current_rate_sv_hr = kSecondsPerHour * rate;
  return out;
}

}  // namespace twinbed::raddose
