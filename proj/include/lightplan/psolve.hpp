#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightplan/dataset.hpp"
#include "lightplan/geometry.hpp"
#include "lightplan/image.hpp"
#include "lightplan/normalnet.hpp"

namespace lightplan {

struct PSInput {
  std::vector<Image> images;
  std::vector<UnitVector3> lights;
  Mask mask;
};

struct PSResult {
  NormalMap normals;
  int n_degenerate = 0;
};

namespace detail {

/// Channel-mean intensity; the Lambertian model is linear per channel, so the
/// mean keeps the system exact for noiseless data.
inline double intensity_at(const Image& img, int y, int x) {
  double s = 0.0;
  for (int c = 0; c < img.channels; ++c) s += img.at(y, x, c);
  return s / img.channels;
}

}  // namespace detail

/// Classical per-pixel least squares: solve L*b ~= i over the masked pixels,
/// normal = b/|b|. Observations below the shadow threshold are dropped when
/// at least 3 usable rows remain; pixels whose solution collapses (|b| tiny)
/// are flagged degenerate and set to (0,0,1).
inline PSResult least_squares_normals(const PSInput& inp) {
  const int m = static_cast<int>(inp.images.size());
  if (m < 3) {
    throw std::invalid_argument("least_squares_normals: need at least 3 lights, got " +
                                std::to_string(m));
  }
  if (inp.lights.size() != inp.images.size()) {
    throw std::invalid_argument("least_squares_normals: image/light count mismatch");
  }
  Eigen::MatrixXd L(m, 3);
  for (int i = 0; i < m; ++i) {
    L(i, 0) = inp.lights[i].x;
    L(i, 1) = inp.lights[i].y;
    L(i, 2) = inp.lights[i].z;
  }
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(L);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(cond < 1e6)) {
      throw std::runtime_error(
          "least_squares_normals: light matrix ill-conditioned (condition number " +
          std::to_string(cond) + ", limit 1e6); lights are coplanar or duplicated");
    }
  }

  constexpr double kShadowThreshold = 1e-4;
  constexpr double kDegenerateNorm = 1e-9;

  PSResult out;
  out.normals = NormalMap(inp.mask.height, inp.mask.width, 3);
  for (int y = 0; y < inp.mask.height; ++y) {
    for (int x = 0; x < inp.mask.width; ++x) out.normals.at(y, x, 2) = 1.0;
  }

  Eigen::VectorXd intensities(m);
  std::vector<int> usable;
  usable.reserve(static_cast<std::size_t>(m));
  for (int y = 0; y < inp.mask.height; ++y) {
    for (int x = 0; x < inp.mask.width; ++x) {
      if (!inp.mask.at(y, x)) continue;
      usable.clear();
      for (int i = 0; i < m; ++i) {
        intensities(i) = detail::intensity_at(inp.images[i], y, x);
        if (intensities(i) >= kShadowThreshold) usable.push_back(i);
      }
      Eigen::Vector3d b;
      if (static_cast<int>(usable.size()) >= 3 && static_cast<int>(usable.size()) < m) {
        Eigen::MatrixXd Lu(usable.size(), 3);
        Eigen::VectorXd iu(usable.size());
        for (std::size_t k = 0; k < usable.size(); ++k) {
          Lu.row(static_cast<Eigen::Index>(k)) = L.row(usable[k]);
          iu(static_cast<Eigen::Index>(k)) = intensities(usable[k]);
        }
        b = (Lu.transpose() * Lu).ldlt().solve(Lu.transpose() * iu);
      } else {
        b = (L.transpose() * L).ldlt().solve(L.transpose() * intensities);
      }
      const double norm = b.norm();
      if (norm < kDegenerateNorm) {
        ++out.n_degenerate;
        continue;  // leave the (0,0,1) fill
      }
      out.normals.at(y, x, 0) = b(0) / norm;
      out.normals.at(y, x, 1) = b(1) / norm;
      out.normals.at(y, x, 2) = b(2) / norm;
    }
  }
  return out;
}

/// Mean over masked pixels of the angle between prediction and ground truth,
/// in degrees.
inline double mean_angular_error(const NormalMap& pred, const NormalMap& gt,
                                 const Mask& mask) {
  if (pred.height != gt.height || pred.width != gt.width ||
      mask.height != gt.height || mask.width != gt.width) {
    throw std::invalid_argument("mean_angular_error: map sizes disagree");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      const UnitVector3 p{pred.at(y, x, 0), pred.at(y, x, 1), pred.at(y, x, 2)};
      const UnitVector3 g{gt.at(y, x, 0), gt.at(y, x, 1), gt.at(y, x, 2)};
      sum += angle_between_deg(p, g);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("mean_angular_error: empty mask");
  return sum / static_cast<double>(n);
}

enum class EvalBackend { kLeastSquares, kNormalNet };

struct EvalResult {
  double mae_deg = 0.0;
  std::size_t n_pixels = 0;
  int n_degenerate = 0;
};

/// Scores a bin subset on one binned scene: pick the subset's image/light
/// pairs, run the backend, compare against ground truth. Duplicate bin
/// indices collapse to one use.
inline EvalResult evaluate_configuration(const BinnedScene& scene,
                                         const std::vector<int>& bin_indices,
                                         EvalBackend backend,
                                         const NormalNetParams* params = nullptr) {
  if (bin_indices.empty()) throw std::invalid_argument("evaluate_configuration: no bins");
  std::set<int> unique_bins;
  for (int b : bin_indices) {
    if (b < 0 || b >= scene.grid.bin_count()) {
      throw std::out_of_range("evaluate_configuration: bin index " + std::to_string(b) +
                              " out of range for K=" + std::to_string(scene.grid.bin_count()));
    }
    unique_bins.insert(b);
  }
  std::vector<Image> images;
  std::vector<UnitVector3> lights;
  for (int b : unique_bins) {
    const int li = scene.bin_to_light[static_cast<std::size_t>(b)];
    if (li == kUnassigned) {
      throw std::runtime_error("evaluate_configuration: bin " + std::to_string(b) +
                               " has no light in this scene");
    }
    images.push_back(scene.sample.images[static_cast<std::size_t>(li)]);
    lights.push_back(scene.sample.lights[static_cast<std::size_t>(li)]);
  }
  EvalResult r;
  r.n_pixels = scene.sample.mask.count_on();
  if (backend == EvalBackend::kLeastSquares) {
    PSResult ps = least_squares_normals({images, lights, scene.sample.mask});
    r.n_degenerate = ps.n_degenerate;
    r.mae_deg = mean_angular_error(ps.normals, scene.sample.normals_gt, scene.sample.mask);
  } else {
    if (params == nullptr) {
      throw std::invalid_argument("evaluate_configuration: net backend needs parameters");
    }
    const NormalMap pred = predict_normals(*params, images, lights, scene.sample.mask);
    r.mae_deg = mean_angular_error(pred, scene.sample.normals_gt, scene.sample.mask);
  }
  return r;
}

/// Mean MAE of one configuration across several scenes.
inline double evaluate_mean_mae(const std::vector<BinnedScene>& scenes,
                                const std::vector<int>& bin_indices, EvalBackend backend,
                                const NormalNetParams* params = nullptr) {
  if (scenes.empty()) throw std::invalid_argument("evaluate_mean_mae: no scenes");
  double sum = 0.0;
  for (const auto& s : scenes) {
    sum += evaluate_configuration(s, bin_indices, backend, params).mae_deg;
  }
  return sum / static_cast<double>(scenes.size());
}

}  // namespace lightplan
