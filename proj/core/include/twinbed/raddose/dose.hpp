#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/common/config.hpp"

namespace twinbed::raddose {

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InvalidPosition : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  bool operator==(const Vec3&) const = default;
};

struct MeshDims {
  int i = 1, j = 1, k = 1;

  std::size_t count() const { return static_cast<std::size_t>(i) * j * k; }
  bool contains(int a, int b, int c) const { return a >= 0 && b >= 0 && c >= 0 && a < i && b < j && c < k; }
  bool operator==(const MeshDims&) const = default;
};

inline constexpr double kSecondsPerHour = 3600.0;

// Regular-mesh dose rates in Sv/s. Voxels without a row read as zero.
class DoseTable {
 public:
  DoseTable() : DoseTable(MeshDims{}) {}
  explicit DoseTable(MeshDims dims);

  const MeshDims& dims() const { return dims_; }
  // Throws TableError on out-of-range indices, negative rates or duplicates.
  void set(int i, int j, int k, double sv_s, std::string name = {});
  double rate_sv_s(int i, int j, int k) const;
  bool has_row(int i, int j, int k) const;
  std::size_t row_count() const { return rows_; }

 private:
  std::size_t index(int i, int j, int k) const;

  MeshDims dims_;
  std::vector<double> rates_;
  std::vector<bool> present_;
  std::size_t rows_ = 0;
};

// Six columns `name,i,j,k,sv_s,sv_hr`; sv_hr must equal 3600 sv_s within
// 1e-9 relative.
DoseTable parse_dose_table(std::string_view text, MeshDims dims);
DoseTable load_dose_table(const std::filesystem::path& path, MeshDims dims);

// Where the boundary rate of the decay approximation comes from.
enum class BoundaryRate { Configured, BoundaryVoxel };

struct RadiationSource {
  Vec3 origin;              // world position of the mesh corner (voxel 0,0,0)
  double voxel_size_m = 1.0;
  DoseTable table;
  double halving_distance_m = 1.0;
  double boundary_rate_sv_s = 0.0;
  double max_range_m = 10.0;
  BoundaryRate boundary_mode = BoundaryRate::Configured;

  const MeshDims& dims() const { return table.dims(); }
  Vec3 center() const;
  Vec3 half_extent() const;
  // Throws std::invalid_argument.
  void validate() const;

  // Keys: origin_x/y/z, voxel_size_m, dims_i/j/k, table (path, relative to
  // the config file), halving_distance_m, boundary_rate_sv_s, max_range_m,
  // boundary_mode = configured | boundary_voxel.
  static RadiationSource from_config(const KeyValueConfig& cfg, const std::filesystem::path& base_dir);
};

enum class Zone { InMesh, Approx, Out };

std::string_view to_string(Zone z);

// Intermediate results of one dose update, stage by stage.
struct DoseEvaluation {
  std::array<int, 3> voxel{};  // relative voxel index
  double distance_m = 0.0;     // from the mesh center
  double boundary_distance_m = 0.0;  // center to mesh boundary along the same ray
  Zone zone = Zone::Out;
  double table_rate_sv_s = 0.0;
  double approx_rate_sv_s = 0.0;
  double rate_sv_s = 0.0;
};

DoseEvaluation evaluate_dose(const RadiationSource& source, const Vec3& pos);
// Dose rate in Sv/s at `pos`. Throws InvalidPosition for non-finite input.
double update_dose(const RadiationSource& source, const Vec3& pos);

// Distance from the center to the mesh boundary along `direction`.
double boundary_distance(const Vec3& half_extent, const Vec3& direction);

// Exponential fall-off beyond the mesh boundary.
double halving_rate(double boundary_rate, double distance, double boundary_distance, double halving_distance);

struct Dosimeter {
  double cumulative_dose_sv = 0.0;
  double current_rate_sv_hr = 0.0;
  Vec3 position;
};

// Throws std::invalid_argument for dt_s <= 0 and InvalidPosition.
Dosimeter dosimeter_tick(const Dosimeter& d, const RadiationSource& source, double dt_s);

}  // namespace twinbed::raddose
