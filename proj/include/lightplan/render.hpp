#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightplan/geometry.hpp"
#include "lightplan/image.hpp"
#include "lightplan/rng.hpp"

namespace lightplan {

enum class ShapeKind { kSphere, kGaussianBumps };
enum class AlbedoPattern { kUniform, kChecker, kSpeckle };

struct GaussianBump {
  double cx = 0.0;      // center, world coords in [-1,1]
  double cy = 0.0;
  double sigma = 0.15;
  double amplitude = 0.25;
};

/// Scene recipe. World coordinates span [-1,1] in x and y with y pointing up;
/// the camera looks down -z orthographically from above, view = (0,0,1).
struct SceneSpec {
  ShapeKind shape = ShapeKind::kSphere;
  int height = 64;
  int width = 64;
  std::array<double, 3> albedo = {0.8, 0.8, 0.8};
  AlbedoPattern albedo_pattern = AlbedoPattern::kUniform;
  double specular_strength = 0.0;   // k_s
  double specular_exponent = 32.0;  // Blinn-Phong p
  double noise_sigma = 0.0;
  bool cast_shadows = false;
  std::uint64_t seed = 0;

  double sphere_radius = 0.9;       // in world units
  double mask_fraction = 1.0;       // keep pixels with r < mask_fraction * sphere_radius
  int bump_count = 4;               // used when bumps is empty; 0 gives a flat field
  std::vector<GaussianBump> bumps;  // explicit bumps override seeded generation
};

struct SceneGeometry {
  NormalMap normals;  // H x W x 3
  Mask mask;
  Image depth;        // H x W x 1, height above the z=0 plane
  double max_depth = 0.0;
};

struct RenderedSample {
  std::vector<Image> images;
  std::vector<UnitVector3> lights;
  NormalMap normals_gt;
  Mask mask;
};

namespace detail {

inline void validate_scene(const SceneSpec& spec) {
  if (spec.height < 8 || spec.width < 8) {
    throw std::invalid_argument("scene: image size must be at least 8x8, got " +
                                std::to_string(spec.width) + "x" + std::to_string(spec.height));
  }
  for (double a : spec.albedo) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("scene: albedo outside [0,1]");
  }
  if (spec.specular_strength < 0.0) throw std::invalid_argument("scene: specular strength < 0");
  if (spec.specular_exponent < 1.0) throw std::invalid_argument("scene: specular exponent < 1");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("scene: noise sigma < 0");
}

inline double pixel_to_world_x(const SceneSpec& spec, int x) {
  return 2.0 * (x + 0.5) / spec.width - 1.0;
}
inline double pixel_to_world_y(const SceneSpec& spec, int y) {
  return 1.0 - 2.0 * (y + 0.5) / spec.height;
}

inline std::vector<GaussianBump> seeded_bumps(const SceneSpec& spec) {
  if (!spec.bumps.empty()) return spec.bumps;
  std::vector<GaussianBump> out;
  Rng rng(mix64(spec.seed ^ 0x62756d7073ULL));
  out.reserve(static_cast<std::size_t>(std::max(0, spec.bump_count)));
  for (int i = 0; i < spec.bump_count; ++i) {
    GaussianBump b;
    b.cx = rng.uniform(-0.6, 0.6);
    b.cy = rng.uniform(-0.6, 0.6);
    b.sigma = rng.uniform(0.12, 0.30);
    b.amplitude = rng.uniform(0.10, 0.35);
    out.push_back(b);
  }
  return out;
}

inline double bump_height(const std::vector<GaussianBump>& bumps, double x, double y) {
  double h = 0.0;
  for (const auto& b : bumps) {
    const double dx = x - b.cx, dy = y - b.cy;
    h += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
  }
  return h;
}

}  // namespace detail

/// Builds ground-truth geometry: analytic normals, footprint mask, and a depth
/// map used by the cast-shadow march.
inline SceneGeometry make_shape(const SceneSpec& spec) {
  detail::validate_scene(spec);
  SceneGeometry geo;
  geo.normals = NormalMap(spec.height, spec.width, 3);
  geo.mask = Mask(spec.height, spec.width);
  geo.depth = Image(spec.height, spec.width, 1);

  if (spec.shape == ShapeKind::kSphere) {
    const double r = spec.sphere_radius;
    const double keep = spec.mask_fraction * r;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double wx = detail::pixel_to_world_x(spec, x);
        const double wy = detail::pixel_to_world_y(spec, y);
        const double rr = wx * wx + wy * wy;
        if (rr >= keep * keep) continue;
        const double wz = std::sqrt(r * r - rr);
        geo.mask.at(y, x) = 1;
        geo.depth.at(y, x) = wz;
        geo.normals.at(y, x, 0) = wx / r;
        geo.normals.at(y, x, 1) = wy / r;
        geo.normals.at(y, x, 2) = wz / r;
      }
    }
  } else {
    const auto bumps = detail::seeded_bumps(spec);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double wx = detail::pixel_to_world_x(spec, x);
        const double wy = detail::pixel_to_world_y(spec, y);
        double gx = 0.0, gy = 0.0;
        for (const auto& b : bumps) {
          const double dx = wx - b.cx, dy = wy - b.cy;
          const double e = b.amplitude *
              std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
          gx += e * (-dx / (b.sigma * b.sigma));
          gy += e * (-dy / (b.sigma * b.sigma));
        }
        const auto n = normalized(-gx, -gy, 1.0);
        geo.mask.at(y, x) = 1;
        geo.depth.at(y, x) = detail::bump_height(bumps, wx, wy);
        geo.normals.at(y, x, 0) = n.x;
        geo.normals.at(y, x, 1) = n.y;
        geo.normals.at(y, x, 2) = n.z;
      }
    }
  }
  for (double d : geo.depth.data) geo.max_depth = std::max(geo.max_depth, d);
  return geo;
}

/// Per-pixel RGB albedo map from the scene recipe.
inline Image make_albedo(const SceneSpec& spec) {
  detail::validate_scene(spec);
  Image alb(spec.height, spec.width, 3);
  const int cell = std::max(2, spec.width / 8);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double scale = 1.0;
      switch (spec.albedo_pattern) {
        case AlbedoPattern::kUniform:
          break;
        case AlbedoPattern::kChecker:
          scale = (((x / cell) + (y / cell)) % 2 == 0) ? 1.0 : 0.45;
          break;
        case AlbedoPattern::kSpeckle:
          scale = 0.4 + 0.6 * to_unit_double(mix64(hash_combine(
                      mix64(spec.seed ^ 0x7370656bULL),
                      static_cast<std::uint64_t>(y) * spec.width + x)));
          break;
      }
      for (int c = 0; c < 3; ++c) alb.at(y, x, c) = spec.albedo[c] * scale;
    }
  }
  return alb;
}

namespace detail {

/// Occluder height at world (x,y): max over the four surrounding masked
/// pixels. Taking the max rather than interpolating keeps thin ridges from
/// leaking light at this resolution; off-mask pixels are holes.
inline double sample_depth(const SceneGeometry& geo, const SceneSpec& spec,
                           double wx, double wy) {
  const double fx = (wx + 1.0) * 0.5 * spec.width - 0.5;
  const double fy = (1.0 - wy) * 0.5 * spec.height - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  double best = -std::numeric_limits<double>::infinity();
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int x = x0 + dx, y = y0 + dy;
      if (x < 0 || y < 0 || x >= spec.width || y >= spec.height) continue;
      if (!geo.mask.at(y, x)) continue;
      best = std::max(best, geo.depth.at(y, x));
    }
  }
  return best;
}

inline bool cast_shadowed(const SceneGeometry& geo, const SceneSpec& spec,
                          double wx, double wy, double wz, const UnitVector3& l) {
  const double step = std::min(2.0 / spec.width, 2.0 / spec.height) * 0.5;
  const double bias = 1e-3;
  double t = step;
  while (true) {
    const double px = wx + t * l.x;
    const double py = wy + t * l.y;
    const double pz = wz + t * l.z + bias;
    if (pz > geo.max_depth) return false;
    if (px < -1.0 || px > 1.0 || py < -1.0 || py > 1.0) return false;
    if (sample_depth(geo, spec, px, py) > pz) return true;
    t += step;
  }
}

}  // namespace detail

/// Renders one image under light l (view fixed at (0,0,1)). image_index feeds
/// the noise stream so datasets are reproducible regardless of render order.
inline Image render_image(const SceneGeometry& geo, const Image& albedo,
                          const UnitVector3& l, const SceneSpec& spec,
                          int image_index = 0) {
  if (l.z <= 0.0) {
    throw std::domain_error("render_image: light must be in the upper hemisphere (z > 0)");
  }
  const UnitVector3 h = normalized(l.x, l.y, l.z + 1.0);  // half vector with v=(0,0,1)
  Image img(spec.height, spec.width, 3);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (!geo.mask.at(y, x)) continue;
      const double nx = geo.normals.at(y, x, 0);
      const double ny = geo.normals.at(y, x, 1);
      const double nz = geo.normals.at(y, x, 2);
      const double ndotl = nx * l.x + ny * l.y + nz * l.z;
      double psi = ndotl > 0.0 ? 1.0 : 0.0;
      if (psi > 0.0 && spec.cast_shadows) {
        const double wx = detail::pixel_to_world_x(spec, x);
        const double wy = detail::pixel_to_world_y(spec, y);
        if (detail::cast_shadowed(geo, spec, wx, wy, geo.depth.at(y, x), l)) psi = 0.0;
      }
      const double ndoth = std::max(0.0, nx * h.x + ny * h.y + nz * h.z);
      const double spec_term =
          spec.specular_strength > 0.0
              ? spec.specular_strength * std::pow(ndoth, spec.specular_exponent)
              : 0.0;
      const std::size_t pix = static_cast<std::size_t>(y) * spec.width + x;
      for (int c = 0; c < 3; ++c) {
        double v = psi * (albedo.at(y, x, c) * std::max(0.0, ndotl) + spec_term);
        if (spec.noise_sigma > 0.0) {
          v += spec.noise_sigma *
               indexed_gaussian(spec.seed, static_cast<std::uint64_t>(image_index),
                                pix * 3 + c);
        }
        img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

/// One image per light over shared geometry.
inline RenderedSample render_dataset(const SceneSpec& spec,
                                     const std::vector<UnitVector3>& lights) {
  if (lights.empty()) throw std::invalid_argument("render_dataset: need at least one light");
  const SceneGeometry geo = make_shape(spec);
  const Image albedo = make_albedo(spec);
  RenderedSample out;
  out.lights = lights;
  out.normals_gt = geo.normals;
  out.mask = geo.mask;
  out.images.reserve(lights.size());
  for (std::size_t i = 0; i < lights.size(); ++i) {
    out.images.push_back(render_image(geo, albedo, lights[i], spec, static_cast<int>(i)));
  }
  return out;
}

}  // namespace lightplan
