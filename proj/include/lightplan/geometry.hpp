#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lightplan {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;

/// Unit-norm direction (light, view, or surface normal).
/// x^2 + y^2 + z^2 = 1 within 1e-9 for anything built through the factories.
struct UnitVector3 {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  double dot(const UnitVector3& o) const { return x * o.x + y * o.y + z * o.z; }
};

inline double squared_norm_error(const UnitVector3& v) {
  return std::abs(v.x * v.x + v.y * v.y + v.z * v.z - 1.0);
}

inline bool is_unit(const UnitVector3& v, double tol = 1e-9) {
  return squared_norm_error(v) <= 2.0 * tol;  // |n^2-1| ~ 2|n-1| near 1
}

/// Normalizes an arbitrary nonzero vector into a UnitVector3.
inline UnitVector3 normalized(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("normalized: zero or non-finite vector");
  }
  return UnitVector3{x / n, y / n, z / n};
}

/// Checked constructor for components that should already be unit-norm.
inline UnitVector3 unit_vector(double x, double y, double z) {
  UnitVector3 v{x, y, z};
  if (!is_unit(v)) {
    throw std::invalid_argument("unit_vector: components are not unit-norm (|v|^2 = " +
                                std::to_string(x * x + y * y + z * z) + ")");
  }
  return v;
}

/// Upper-hemisphere direction in degrees: azimuth in [0,180], elevation in [-90,90].
struct SphericalCoord {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

inline void validate(const SphericalCoord& s) {
  if (!std::isfinite(s.azimuth_deg) || !std::isfinite(s.elevation_deg) ||
      s.azimuth_deg < 0.0 || s.azimuth_deg > 180.0 || s.elevation_deg < -90.0 ||
      s.elevation_deg > 90.0) {
    throw std::out_of_range("SphericalCoord out of range: azimuth " +
                            std::to_string(s.azimuth_deg) + " deg, elevation " +
                            std::to_string(s.elevation_deg) + " deg");
  }
}

// Convention: l = (cos(el)*cos(az), sin(el), cos(el)*sin(az)).
// The azimuth/elevation ranges above then cover exactly the z >= 0 hemisphere.
inline UnitVector3 spherical_to_cartesian(const SphericalCoord& s) {
  validate(s);
  const double az = s.azimuth_deg * kRadPerDeg;
  const double el = s.elevation_deg * kRadPerDeg;
  const double ce = std::cos(el);
  return UnitVector3{ce * std::cos(az), std::sin(el), ce * std::sin(az)};
}

inline SphericalCoord cartesian_to_spherical(const UnitVector3& v) {
  if (v.z < -1e-9) {
    throw std::domain_error("cartesian_to_spherical: direction below the upper hemisphere (z = " +
                            std::to_string(v.z) + ")");
  }
  const double el = std::asin(std::clamp(v.y, -1.0, 1.0)) * kDegPerRad;
  double az = std::atan2(std::max(v.z, 0.0), v.x) * kDegPerRad;
  if (az < 0.0) az = 0.0;
  if (az > 180.0) az = 180.0;
  return SphericalCoord{az, el};
}

/// Angle between two unit vectors, in degrees in [0,180].
/// atan2(|a x b|, a.b) instead of acos(a.b): acos loses all precision near
/// parallel vectors (one ulp of dot below 1.0 already reads as ~1e-6 deg),
/// while the cross-product magnitude stays accurate down to zero.
inline double angle_between_deg(const UnitVector3& a, const UnitVector3& b) {
  const double cx = a.y * b.z - a.z * b.y;
  const double cy = a.z * b.x - a.x * b.z;
  const double cz = a.x * b.y - a.y * b.x;
  const double sin_mag = std::sqrt(cx * cx + cy * cy + cz * cz);
  return std::atan2(sin_mag, a.dot(b)) * kDegPerRad;
}

}  // namespace lightplan
