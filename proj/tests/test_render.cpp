#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lightplan/render.hpp"

using namespace lightplan;
using Catch::Matchers::WithinAbs;

namespace {

SceneSpec flat_field(int size = 9) {
  SceneSpec spec;
  spec.shape = ShapeKind::kGaussianBumps;
  spec.bump_count = 0;  // height identically zero
  spec.height = size;
  spec.width = size;
  spec.albedo = {1.0, 1.0, 1.0};
  return spec;
}

}  // namespace

TEST_CASE("sphere normals point up at the center") {
  SceneSpec spec;
  spec.height = 33;  // odd size puts a pixel center at the optical axis
  spec.width = 33;
  const SceneGeometry geo = make_shape(spec);
  REQUIRE(geo.mask.at(16, 16) == 1);
  REQUIRE_THAT(geo.normals.at(16, 16, 0), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(geo.normals.at(16, 16, 1), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(geo.normals.at(16, 16, 2), WithinAbs(1.0, 1e-12));

  // Every masked normal is unit with positive z.
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) {
      if (!geo.mask.at(y, x)) continue;
      const double nx = geo.normals.at(y, x, 0);
      const double ny = geo.normals.at(y, x, 1);
      const double nz = geo.normals.at(y, x, 2);
      REQUIRE_THAT(nx * nx + ny * ny + nz * nz, WithinAbs(1.0, 1e-9));
      REQUIRE(nz > 0.0);
    }
  }
}

TEST_CASE("flat height field has constant up normals") {
  const SceneGeometry geo = make_shape(flat_field());
  REQUIRE(geo.mask.count_on() == 81);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) {
      REQUIRE_THAT(geo.normals.at(y, x, 2), WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("bump apex normal is vertical") {
  SceneSpec spec = flat_field(9);
  spec.bumps = {GaussianBump{0.0, 0.0, 0.2, 0.3}};
  spec.bump_count = 1;
  const SceneGeometry geo = make_shape(spec);
  // Gradient vanishes at the maximum, which sits at the center pixel.
  REQUIRE_THAT(geo.normals.at(4, 4, 0), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(geo.normals.at(4, 4, 1), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(geo.normals.at(4, 4, 2), WithinAbs(1.0, 1e-12));
  // On the left flank the surface rises to the right, so the normal
  // leans left, away from the apex.
  REQUIRE(geo.normals.at(4, 1, 0) < 0.0);
}

TEST_CASE("head-on light gives unit intensity at unit albedo") {
  const SceneSpec spec = flat_field();
  const SceneGeometry geo = make_shape(spec);
  const Image img = render_image(geo, make_albedo(spec), unit_vector(0, 0, 1), spec);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) {
      for (int c = 0; c < 3; ++c) REQUIRE(img.at(y, x, c) == 1.0);
    }
  }
}

TEST_CASE("tilted light scales intensity by the cosine") {
  const SceneSpec spec = flat_field();
  const SceneGeometry geo = make_shape(spec);
  const Image img = render_image(geo, make_albedo(spec), unit_vector(0.6, 0, 0.8), spec);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 9; ++x) {
      REQUIRE_THAT(img.at(y, x, 0), WithinAbs(0.8, 1e-15));
    }
  }
}

TEST_CASE("pixels facing away from the light go black") {
  SceneSpec spec;
  spec.height = 33;
  spec.width = 33;
  spec.albedo = {0.9, 0.9, 0.9};
  const SceneGeometry geo = make_shape(spec);
  const UnitVector3 l = normalized(0.9, 0.0, 0.25);
  const Image img = render_image(geo, make_albedo(spec), l, spec);

  int facing_away = 0;
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) {
      if (!geo.mask.at(y, x)) continue;
      const double ndotl = geo.normals.at(y, x, 0) * l.x + geo.normals.at(y, x, 1) * l.y +
                           geo.normals.at(y, x, 2) * l.z;
      if (ndotl < 0.0) {
        ++facing_away;
        for (int c = 0; c < 3; ++c) REQUIRE(img.at(y, x, c) == 0.0);
      }
    }
  }
  REQUIRE(facing_away > 0);  // the grazing light actually creates shadowed pixels
}

TEST_CASE("lower hemisphere lights are rejected") {
  const SceneSpec spec = flat_field();
  const SceneGeometry geo = make_shape(spec);
  REQUIRE_THROWS_AS(render_image(geo, make_albedo(spec), unit_vector(0, 0.6, -0.8), spec),
                    std::domain_error);
  REQUIRE_THROWS_AS(render_image(geo, make_albedo(spec), unit_vector(1, 0, 0), spec),
                    std::domain_error);
}

TEST_CASE("noiseless shading matches the per-pixel formula") {
  SceneSpec spec;
  spec.height = 21;
  spec.width = 21;
  spec.albedo_pattern = AlbedoPattern::kChecker;
  spec.albedo = {0.8, 0.7, 0.6};
  const SceneGeometry geo = make_shape(spec);
  const Image albedo = make_albedo(spec);
  const UnitVector3 l = normalized(0.3, -0.2, 0.9);
  const Image img = render_image(geo, albedo, l, spec);

  for (int y = 0; y < 21; ++y) {
    for (int x = 0; x < 21; ++x) {
      for (int c = 0; c < 3; ++c) {
        double want = 0.0;
        if (geo.mask.at(y, x)) {
          const double ndotl = geo.normals.at(y, x, 0) * l.x + geo.normals.at(y, x, 1) * l.y +
                               geo.normals.at(y, x, 2) * l.z;
          want = ndotl > 0.0 ? albedo.at(y, x, c) * ndotl : 0.0;
        }
        REQUIRE_THAT(img.at(y, x, c), WithinAbs(want, 1e-12));
      }
    }
  }
}

TEST_CASE("albedo scaling scales noiseless intensities") {
  SceneSpec bright;
  bright.height = 17;
  bright.width = 17;
  bright.albedo = {0.9, 0.8, 0.7};
  SceneSpec dim = bright;
  dim.albedo = {0.45, 0.4, 0.35};

  const SceneGeometry geo = make_shape(bright);
  const UnitVector3 l = normalized(0.2, 0.3, 0.9);
  const Image a = render_image(geo, make_albedo(bright), l, bright);
  const Image b = render_image(geo, make_albedo(dim), l, dim);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    REQUIRE_THAT(b.data[i] * 2.0, WithinAbs(a.data[i], 1e-12));
  }
}

TEST_CASE("specular highlights add light on top of the diffuse term") {
  SceneSpec matte = flat_field();
  matte.albedo = {0.5, 0.5, 0.5};
  SceneSpec glossy = matte;
  glossy.specular_strength = 0.3;
  glossy.specular_exponent = 8.0;

  const SceneGeometry geo = make_shape(matte);
  const Image base = render_image(geo, make_albedo(matte), unit_vector(0, 0, 1), matte);
  const Image shiny = render_image(geo, make_albedo(glossy), unit_vector(0, 0, 1), glossy);

  // Head-on: half vector equals the normal, so the highlight is k_s exactly.
  REQUIRE_THAT(shiny.at(4, 4, 0), WithinAbs(0.8, 1e-12));
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    REQUIRE(shiny.data[i] >= base.data[i]);
  }
}

TEST_CASE("cast shadows only remove light") {
  SceneSpec open = flat_field(31);
  open.albedo = {0.8, 0.8, 0.8};
  open.bumps = {GaussianBump{0.3, 0.0, 0.12, 0.7}};
  open.bump_count = 1;
  SceneSpec shadowed = open;
  shadowed.cast_shadows = true;

  const UnitVector3 l = spherical_to_cartesian({10.0, 10.0});
  const Image lit = render_image(make_shape(open), make_albedo(open), l, open);
  const Image dark = render_image(make_shape(shadowed), make_albedo(shadowed), l, shadowed);

  int darkened = 0;
  for (std::size_t i = 0; i < lit.data.size(); ++i) {
    REQUIRE(dark.data[i] <= lit.data[i] + 1e-15);
    if (dark.data[i] < lit.data[i] - 1e-12) ++darkened;
  }
  REQUIRE(darkened > 0);  // the bump really occludes some pixels
}

TEST_CASE("dataset rendering is deterministic and shares geometry") {
  SceneSpec spec;
  spec.height = 16;
  spec.width = 16;
  spec.noise_sigma = 0.05;
  spec.seed = 99;
  const std::vector<UnitVector3> lights = {unit_vector(0, 0, 1), normalized(0.5, 0, 0.9),
                                           normalized(0, 0.5, 0.9)};
  const RenderedSample a = render_dataset(spec, lights);
  const RenderedSample b = render_dataset(spec, lights);

  REQUIRE(a.images.size() == 3);
  REQUIRE(a.lights.size() == 3);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    REQUIRE(a.images[i].data == b.images[i].data);  // bit-identical
  }
  REQUIRE(a.normals_gt.data == b.normals_gt.data);

  // Noise differs between images of the same dataset.
  REQUIRE(a.images[0].data != a.images[1].data);

  REQUIRE_THROWS_AS(render_dataset(spec, {}), std::invalid_argument);
}

TEST_CASE("scene validation rejects nonsense") {
  SceneSpec bad;
  bad.height = 4;  // below the minimum
  REQUIRE_THROWS_AS(make_shape(bad), std::invalid_argument);

  SceneSpec dark;
  dark.albedo = {1.2, 0.5, 0.5};
  REQUIRE_THROWS_AS(make_shape(dark), std::invalid_argument);

  SceneSpec noisy;
  noisy.noise_sigma = -0.1;
  REQUIRE_THROWS_AS(make_shape(noisy), std::invalid_argument);
}
