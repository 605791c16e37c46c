#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lightplan/geometry.hpp"
#include "lightplan/lightspace.hpp"
#include "lightplan/psolve.hpp"
#include "lightplan/rng.hpp"

namespace lightplan {

struct PlanResult {
  std::string method;
  std::vector<int> bin_indices;
  double mae_deg = 0.0;
  double wall_time_ms = 0.0;
};

/// Uniform rejection sampling over bin centers: keep drawing M distinct bins
/// until all pairwise separations reach min_sep_deg. Bins whose center
/// elevation lies outside [-max_abs_elevation_deg, +max_abs_elevation_deg]
/// are excluded up front (margin against grazing lights).
inline std::vector<int> plan_random(const LightBinGrid& grid, int m, double min_sep_deg,
                                    std::uint64_t seed,
                                    double max_abs_elevation_deg = 75.0) {
  if (m < 1) throw std::invalid_argument("plan_random: M must be >= 1");
  std::vector<int> candidates;
  for (int b = 0; b < grid.bin_count(); ++b) {
    if (std::abs(grid.center_spherical(b).elevation_deg) <= max_abs_elevation_deg + 1e-9) {
      candidates.push_back(b);
    }
  }
  if (static_cast<int>(candidates.size()) < m) {
    throw std::runtime_error("plan_random: only " + std::to_string(candidates.size()) +
                             " bins inside the elevation margin, need M=" + std::to_string(m));
  }
  Rng rng(mix64(seed ^ 0x72616e646f6dULL));
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::vector<std::size_t> pick =
        rng.sample_without_replacement(candidates.size(), static_cast<std::size_t>(m));
    std::vector<int> bins;
    bins.reserve(static_cast<std::size_t>(m));
    for (std::size_t idx : pick) bins.push_back(candidates[idx]);
    bool ok = true;
    for (std::size_t i = 0; i + 1 < bins.size() && ok; ++i) {
      for (std::size_t j = i + 1; j < bins.size() && ok; ++j) {
        if (angle_between_deg(grid.bin_centers[static_cast<std::size_t>(bins[i])],
                              grid.bin_centers[static_cast<std::size_t>(bins[j])]) <
            min_sep_deg) {
          ok = false;
        }
      }
    }
    if (ok) {
      std::sort(bins.begin(), bins.end());
      return bins;
    }
  }
  throw std::runtime_error("plan_random: no M=" + std::to_string(m) +
                           " placement with pairwise separation >= " +
                           std::to_string(min_sep_deg) + " deg found in " +
                           std::to_string(kMaxAttempts) + " attempts");
}

namespace detail {

inline double angular_dist(const UnitVector3& a, const UnitVector3& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

}  // namespace detail

/// Spherical k-means over the observed lights (angular distance, normalized
/// mean centroids, k-means++ seeding); each centroid maps to the bin of its
/// nearest light. Distinct bins are enforced by walking to the next-nearest
/// light when a bin is already taken.
inline std::vector<int> plan_kmeans(const LightBinGrid& grid,
                                    const std::vector<UnitVector3>& lights, int m,
                                    std::uint64_t seed) {
  const int n = static_cast<int>(lights.size());
  if (m < 1) throw std::invalid_argument("plan_kmeans: M must be >= 1");
  if (n < m) {
    throw std::invalid_argument("plan_kmeans: " + std::to_string(n) + " lights for M=" +
                                std::to_string(m));
  }
  Rng rng(mix64(seed ^ 0x6b6d65616e73ULL));

  std::vector<UnitVector3> centroids;
  centroids.push_back(lights[rng.below(static_cast<std::uint64_t>(n))]);
  std::vector<double> d2(static_cast<std::size_t>(n));
  while (static_cast<int>(centroids.size()) < m) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = detail::angular_dist(lights[static_cast<std::size_t>(i)], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c) {
        best = std::min(best, detail::angular_dist(lights[static_cast<std::size_t>(i)],
                                                   centroids[c]));
      }
      d2[static_cast<std::size_t>(i)] = best * best;
      total += best * best;
    }
    if (total <= 0.0) {
      // All lights coincide with existing centroids; any remaining light works.
      centroids.push_back(lights[rng.below(static_cast<std::uint64_t>(n))]);
      continue;
    }
    double r = rng.uniform() * total;
    int chosen = n - 1;
    for (int i = 0; i < n; ++i) {
      r -= d2[static_cast<std::size_t>(i)];
      if (r <= 0.0) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(lights[static_cast<std::size_t>(chosen)]);
  }

  std::vector<int> owner(static_cast<std::size_t>(n), 0);
  constexpr int kMaxIters = 100;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_dot = lights[static_cast<std::size_t>(i)].dot(centroids[0]);
      for (int c = 1; c < m; ++c) {
        const double d = lights[static_cast<std::size_t>(i)].dot(centroids[static_cast<std::size_t>(c)]);
        if (d > best_dot) {
          best_dot = d;
          best = c;
        }
      }
      owner[static_cast<std::size_t>(i)] = best;
    }
    double moved = 0.0;
    for (int c = 0; c < m; ++c) {
      double sx = 0.0, sy = 0.0, sz = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (owner[static_cast<std::size_t>(i)] != c) continue;
        sx += lights[static_cast<std::size_t>(i)].x;
        sy += lights[static_cast<std::size_t>(i)].y;
        sz += lights[static_cast<std::size_t>(i)].z;
        ++count;
      }
      UnitVector3 next;
      if (count == 0 || (sx == 0.0 && sy == 0.0 && sz == 0.0)) {
        // Empty cluster: restart it at the light farthest from its centroid.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = detail::angular_dist(
              lights[static_cast<std::size_t>(i)],
              centroids[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next = lights[static_cast<std::size_t>(far)];
        owner[static_cast<std::size_t>(far)] = c;
      } else {
        next = normalized(sx, sy, sz);
      }
      const auto& cur = centroids[static_cast<std::size_t>(c)];
      moved = std::max(moved, std::abs(next.x - cur.x) + std::abs(next.y - cur.y) +
                                  std::abs(next.z - cur.z));
      centroids[static_cast<std::size_t>(c)] = next;
    }
    if (moved < 1e-6) break;
  }

  std::vector<int> bins;
  std::vector<char> bin_taken(static_cast<std::size_t>(grid.bin_count()), 0);
  for (int c = 0; c < m; ++c) {
    std::vector<std::pair<double, int>> by_dist;
    by_dist.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      by_dist.emplace_back(
          detail::angular_dist(lights[static_cast<std::size_t>(i)],
                               centroids[static_cast<std::size_t>(c)]),
          i);
    }
    std::sort(by_dist.begin(), by_dist.end());
    int bin = kUnassigned;
    for (const auto& [dist, i] : by_dist) {
      const int b = bin_of(grid, lights[static_cast<std::size_t>(i)]);
      if (!bin_taken[static_cast<std::size_t>(b)]) {
        bin = b;
        break;
      }
    }
    if (bin == kUnassigned) {
      throw std::runtime_error("plan_kmeans: lights cover fewer than M=" +
                               std::to_string(m) + " distinct bins");
    }
    bin_taken[static_cast<std::size_t>(bin)] = 1;
    bins.push_back(bin);
  }
  std::sort(bins.begin(), bins.end());
  return bins;
}

struct OrthoTripletResult {
  std::vector<int> bin_indices;
  bool relaxed = false;  // no triple fit the 90 degree window; best effort used
};

/// The three bin centers closest to a mutually orthogonal triple: exhaustive
/// search maximizing the minimum pairwise angle among triples whose pairwise
/// angles all fall inside 90 +- tolerance_deg. Falls back to the best
/// available spread (relaxed=true) when the window is empty.
inline OrthoTripletResult plan_orthogonal_triplet(const LightBinGrid& grid,
                                                  double tolerance_deg = 15.0) {
  const int k = grid.bin_count();
  if (k < 3) {
    throw std::invalid_argument("plan_orthogonal_triplet: grid has " + std::to_string(k) +
                                " bins, cannot form a triple");
  }
  double best_feasible = -1.0, best_any = -1.0;
  std::vector<int> feasible_bins, any_bins;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      const double ab = angle_between_deg(grid.bin_centers[static_cast<std::size_t>(a)],
                                          grid.bin_centers[static_cast<std::size_t>(b)]);
      for (int c = b + 1; c < k; ++c) {
        const double ac = angle_between_deg(grid.bin_centers[static_cast<std::size_t>(a)],
                                            grid.bin_centers[static_cast<std::size_t>(c)]);
        const double bc = angle_between_deg(grid.bin_centers[static_cast<std::size_t>(b)],
                                            grid.bin_centers[static_cast<std::size_t>(c)]);
        const double mn = std::min({ab, ac, bc});
        const double mx = std::max({ab, ac, bc});
        if (mn > best_any) {
          best_any = mn;
          any_bins = {a, b, c};
        }
        if (mn >= 90.0 - tolerance_deg && mx <= 90.0 + tolerance_deg && mn > best_feasible) {
          best_feasible = mn;
          feasible_bins = {a, b, c};
        }
      }
    }
  }
  if (!feasible_bins.empty()) return {feasible_bins, false};
  return {any_bins, true};
}

struct ExhaustiveResult {
  std::vector<int> best_bins;
  double best_mae = 0.0;
  std::vector<std::pair<std::vector<int>, double>> table;  // every subset, in lex order
};

namespace detail {

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > (1LL << 40)) return r;  // far past any cap we check against
  }
  return r;
}

}  // namespace detail

/// Brute-force oracle: scores every M-subset of the covered bins with the
/// given backend and returns the global best plus the full table.
inline ExhaustiveResult plan_exhaustive(const std::vector<BinnedScene>& scenes, int m,
                                        EvalBackend backend,
                                        const NormalNetParams* params = nullptr) {
  if (scenes.empty()) throw std::invalid_argument("plan_exhaustive: no scenes");
  const std::vector<int> bins = scenes.front().covered_bins();
  const int k = static_cast<int>(bins.size());
  if (m < 1 || m > k) {
    throw std::invalid_argument("plan_exhaustive: M=" + std::to_string(m) +
                                " outside [1, " + std::to_string(k) + "]");
  }
  const long long combos = detail::binomial(k, m);
  constexpr long long kCap = 200000;
  if (combos > kCap) {
    throw std::runtime_error("plan_exhaustive: C(" + std::to_string(k) + "," +
                             std::to_string(m) + ") = " + std::to_string(combos) +
                             " exceeds the cap of " + std::to_string(kCap) +
                             "; reduce K or M");
  }
  ExhaustiveResult out;
  out.best_mae = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::vector<int> subset(static_cast<std::size_t>(m));
  while (true) {
    for (int i = 0; i < m; ++i) {
      subset[static_cast<std::size_t>(i)] = bins[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    // Coplanar or duplicate light subsets cannot be solved; score them as
    // infinitely bad instead of aborting the whole search.
    double mae = std::numeric_limits<double>::infinity();
    try {
      mae = evaluate_mean_mae(scenes, subset, backend, params);
    } catch (const std::runtime_error&) {
    }
    out.table.emplace_back(subset, mae);
    if (mae < out.best_mae) {
      out.best_mae = mae;
      out.best_bins = subset;
    }
    int pos = m - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == k - m + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < m; ++i) {
      idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
    }
  }
  if (!std::isfinite(out.best_mae)) {
    throw std::runtime_error("plan_exhaustive: every subset was degenerate");
  }
  return out;
}

/// Fills in each method's mean MAE over the scenes and returns the rows
/// sorted best-first.
inline std::vector<PlanResult> compare(std::vector<PlanResult> methods,
                                       const std::vector<BinnedScene>& scenes,
                                       EvalBackend backend,
                                       const NormalNetParams* params = nullptr) {
  for (auto& row : methods) {
    row.mae_deg = evaluate_mean_mae(scenes, row.bin_indices, backend, params);
  }
  std::stable_sort(methods.begin(), methods.end(),
                   [](const PlanResult& a, const PlanResult& b) {
                     return a.mae_deg < b.mae_deg;
                   });
  return methods;
}

inline void write_compare_csv(const std::string& path, const std::vector<PlanResult>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_compare_csv: cannot open " + path);
  out << "rank,method,m,bin_indices,mae_deg,wall_time_ms\n";
  out.precision(10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << (i + 1) << "," << rows[i].method << "," << rows[i].bin_indices.size() << ",";
    for (std::size_t j = 0; j < rows[i].bin_indices.size(); ++j) {
      out << (j ? ";" : "") << rows[i].bin_indices[j];
    }
    out << "," << rows[i].mae_deg << "," << rows[i].wall_time_ms << "\n";
  }
}

/// Hand-rolled SVG line chart of MAE against M, one polyline per method.
inline void write_mae_vs_m_svg(
    const std::string& path,
    const std::map<std::string, std::vector<std::pair<int, double>>>& series) {
  constexpr double kW = 640, kH = 420, kL = 70, kR = 30, kT = 40, kB = 55;
  int m_lo = 1 << 30, m_hi = 0;
  double y_hi = 0.0;
  for (const auto& [name, pts] : series) {
    for (const auto& [m, mae] : pts) {
      m_lo = std::min(m_lo, m);
      m_hi = std::max(m_hi, m);
      y_hi = std::max(y_hi, mae);
    }
  }
  if (m_hi == 0) throw std::invalid_argument("write_mae_vs_m_svg: no data points");
  if (m_hi == m_lo) ++m_hi;
  y_hi = y_hi <= 0.0 ? 1.0 : y_hi * 1.15;
  const auto px = [&](double m) { return kL + (m - m_lo) / (m_hi - m_lo) * (kW - kL - kR); };
  const auto py = [&](double v) { return kH - kB - v / y_hi * (kH - kT - kB); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_mae_vs_m_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">mean angular error vs number of lights</text>\n";
  out << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
      << kH - kB << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
      << "\" stroke=\"black\"/>\n";
  for (int m = m_lo; m <= m_hi; ++m) {
    out << "<text x=\"" << px(m) << "\" y=\"" << kH - kB + 20
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << m
        << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = y_hi * i / 4.0;
    out << "<text x=\"" << kL - 8 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">";
    out.precision(3);
    out << v << "</text>\n"
        << "<line x1=\"" << kL << "\" y1=\"" << py(v) << "\" x2=\"" << kW - kR << "\" y2=\""
        << py(v) << "\" stroke=\"#dddddd\"/>\n";
  }
  out << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">M</text>\n"
      << "<text x=\"18\" y=\"" << (kT + kH - kB) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 18 "
      << (kT + kH - kB) / 2 << ")\">MAE (deg)</text>\n";
  int ci = 0;
  double legend_y = kT + 6;
  for (const auto& [name, pts] : series) {
    const char* color = kColors[ci % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [m, mae] : pts) out << px(m) << "," << py(mae) << " ";
    out << "\"/>\n";
    for (const auto& [m, mae] : pts) {
      out << "<circle cx=\"" << px(m) << "\" cy=\"" << py(mae) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    out << "<rect x=\"" << kW - kR - 150 << "\" y=\"" << legend_y << "\" width=\"12\" "
        << "height=\"12\" fill=\"" << color << "\"/>\n"
        << "<text x=\"" << kW - kR - 132 << "\" y=\"" << legend_y + 10
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << name << "</text>\n";
    legend_y += 18;
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace lightplan
