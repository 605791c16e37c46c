#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "lightplan/geometry.hpp"

namespace lightplan {

constexpr int kUnassigned = -1;

/// Uniform azimuth x elevation discretization of the upper hemisphere.
/// Bin centers sit at cell midpoints; bin index = elevation_cell * n_azimuth + azimuth_cell.
struct LightBinGrid {
  int n_azimuth = 8;
  int n_elevation = 6;
  std::vector<UnitVector3> bin_centers;

  int bin_count() const { return n_azimuth * n_elevation; }
  double azimuth_cell_deg() const { return 180.0 / n_azimuth; }
  double elevation_cell_deg() const { return 180.0 / n_elevation; }

  SphericalCoord center_spherical(int bin) const {
    const int az = bin % n_azimuth;
    const int el = bin / n_azimuth;
    return SphericalCoord{(az + 0.5) * azimuth_cell_deg(),
                          -90.0 + (el + 0.5) * elevation_cell_deg()};
  }
};

inline LightBinGrid make_grid(int n_azimuth, int n_elevation) {
  if (n_azimuth < 1 || n_elevation < 1) {
    throw std::out_of_range("make_grid: bin counts must be >= 1 (got " +
                            std::to_string(n_azimuth) + " x " + std::to_string(n_elevation) + ")");
  }
  LightBinGrid grid;
  grid.n_azimuth = n_azimuth;
  grid.n_elevation = n_elevation;
  grid.bin_centers.reserve(static_cast<std::size_t>(n_azimuth) * n_elevation);
  for (int bin = 0; bin < grid.bin_count(); ++bin) {
    grid.bin_centers.push_back(spherical_to_cartesian(grid.center_spherical(bin)));
  }
  return grid;
}

/// Cell lookup by floor division. Boundary angles land in the higher cell;
/// the top boundary (azimuth 180 / elevation 90) stays in the last cell.
inline int bin_of(const LightBinGrid& grid, const UnitVector3& l) {
  const SphericalCoord s = cartesian_to_spherical(l);  // rejects lower hemisphere
  int az = static_cast<int>(s.azimuth_deg / grid.azimuth_cell_deg());
  int el = static_cast<int>((s.elevation_deg + 90.0) / grid.elevation_cell_deg());
  az = std::min(az, grid.n_azimuth - 1);
  el = std::min(el, grid.n_elevation - 1);
  return el * grid.n_azimuth + az;
}

/// Result of the greedy bin/light pairing. pairs[bin] is a light index or
/// kUnassigned; residual_angles_deg[bin] is the pairing's angular deviation
/// (meaningful only where assigned).
struct BinAssignment {
  std::vector<int> pairs;
  std::vector<double> residual_angles_deg;

  std::size_t assigned_count() const {
    std::size_t n = 0;
    for (int p : pairs) n += (p != kUnassigned);
    return n;
  }
};

/// Greedy smallest-angle-first pairing of lights to bins.
///
/// All (bin, light) angles are sorted ascending (ties broken by bin then
/// light index) and still-empty bins are filled in that order. With
/// unique = true a light feeds at most one bin, so sparse or biased light
/// sets cannot collapse many bins onto one light; unique = false keeps the
/// light reusable. Bins are left kUnassigned when lights run out.
inline BinAssignment assign_lights(const LightBinGrid& grid,
                                   const std::vector<UnitVector3>& lights,
                                   bool unique = true) {
  if (lights.empty()) {
    throw std::invalid_argument("assign_lights: empty light list");
  }
  const int n_bins = grid.bin_count();
  const int n_lights = static_cast<int>(lights.size());

  struct Entry {
    double angle;
    int bin;
    int light;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(n_bins) * n_lights);
  for (int b = 0; b < n_bins; ++b) {
    for (int j = 0; j < n_lights; ++j) {
      entries.push_back({angle_between_deg(grid.bin_centers[b], lights[j]), b, j});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.angle, a.bin, a.light) < std::tie(b.angle, b.bin, b.light);
  });

  BinAssignment out;
  out.pairs.assign(n_bins, kUnassigned);
  out.residual_angles_deg.assign(n_bins, 0.0);
  std::vector<char> light_used(lights.size(), 0);
  for (const Entry& e : entries) {
    if (out.pairs[e.bin] != kUnassigned) continue;
    if (unique && light_used[e.light]) continue;
    out.pairs[e.bin] = e.light;
    out.residual_angles_deg[e.bin] = e.angle;
    light_used[e.light] = 1;
  }
  return out;
}

}  // namespace lightplan
