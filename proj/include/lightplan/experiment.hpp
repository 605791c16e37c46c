#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lightplan/config.hpp"
#include "lightplan/dataset.hpp"
#include "lightplan/planner.hpp"
#include "lightplan/psolve.hpp"
#include "lightplan/render.hpp"
#include "lightplan/selector.hpp"
#include "lightplan/trainer.hpp"

namespace lightplan {

/// A full scenario: the bin grid plus scene-generation and training knobs,
/// read from the sectioned config format.
struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // empty means {seed}
  std::string output_dir = "out";
  EvalBackend backend = EvalBackend::kLeastSquares;
  std::vector<std::string> methods = {"learned", "random", "kmeans", "exhaustive"};
  std::vector<int> m_values = {3};

  LightBinGrid grid = make_grid(8, 6);

  // scene generation
  int scene_count = 8;
  int scene_height = 32;
  int scene_width = 32;
  std::uint64_t scene_seed = 1000;
  double noise_sigma = 0.01;
  int specular_every = 2;  // every n-th scene gets highlights; 0 = never
  double specular_strength = 0.4;
  double specular_exponent = 32.0;
  bool cast_shadows = false;
  double albedo = 0.8;
  double mask_fraction = 1.0;
  std::string shapes = "mixed";  // sphere | bumps | mixed
  double jitter_fraction = 0.45;  // light offset inside its bin, of the half-cell

  TrainConfig train;

  // random planner
  double min_sep_deg = 20.0;
  double max_abs_elevation_deg = 75.0;

  std::string config_text;  // raw text the config was parsed from

  std::vector<std::uint64_t> run_seeds() const {
    return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
  }
};

inline ExperimentConfig parse_experiment(const ConfigFile& file) {
  ExperimentConfig cfg;
  cfg.name = file.get_string("experiment", "name", cfg.name);
  cfg.seed = seed_from_env(file.get_u64("experiment", "seed", cfg.seed));
  cfg.seeds.clear();
  for (int s : file.get_int_list("experiment", "seeds", {})) {
    cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (std::getenv("LIPIDS_SEED") != nullptr) cfg.seeds = {cfg.seed};
  cfg.output_dir = file.get_string("experiment", "output_dir", cfg.output_dir);
  const std::string backend = file.get_string("experiment", "backend", "ls");
  if (backend == "ls") cfg.backend = EvalBackend::kLeastSquares;
  else if (backend == "net") cfg.backend = EvalBackend::kNormalNet;
  else throw std::runtime_error("config: backend must be ls or net, got '" + backend + "'");
  cfg.methods = file.get_string_list("experiment", "methods", cfg.methods);
  cfg.m_values = file.get_int_list("experiment", "m", cfg.m_values);

  cfg.grid = make_grid(file.get_int("grid", "n_azimuth", 8),
                       file.get_int("grid", "n_elevation", 6));

  cfg.scene_count = file.get_int("scenes", "count", cfg.scene_count);
  cfg.scene_height = file.get_int("scenes", "height", cfg.scene_height);
  cfg.scene_width = file.get_int("scenes", "width", cfg.scene_width);
  cfg.scene_seed = file.get_u64("scenes", "seed", cfg.scene_seed);
  cfg.noise_sigma = file.get_double("scenes", "noise_sigma", cfg.noise_sigma);
  cfg.specular_every = file.get_int("scenes", "specular_every", cfg.specular_every);
  cfg.specular_strength = file.get_double("scenes", "specular_strength", cfg.specular_strength);
  cfg.specular_exponent = file.get_double("scenes", "specular_exponent", cfg.specular_exponent);
  cfg.cast_shadows = file.get_bool("scenes", "cast_shadows", cfg.cast_shadows);
  cfg.albedo = file.get_double("scenes", "albedo", cfg.albedo);
  cfg.mask_fraction = file.get_double("scenes", "mask_fraction", cfg.mask_fraction);
  cfg.shapes = file.get_string("scenes", "shapes", cfg.shapes);
  cfg.jitter_fraction = file.get_double("scenes", "jitter_fraction", cfg.jitter_fraction);

  cfg.train.epochs = file.get_int("train", "epochs", cfg.train.epochs);
  cfg.train.early_stop_epoch = file.get_int("train", "early_stop_epoch",
                                            cfg.train.early_stop_epoch);
  cfg.train.batch_size = file.get_int("train", "batch_size", cfg.train.batch_size);
  cfg.train.pixels_per_draw = file.get_int("train", "pixels_per_draw",
                                           cfg.train.pixels_per_draw);
  cfg.train.steps_per_epoch = file.get_int("train", "steps_per_epoch",
                                           cfg.train.steps_per_epoch);
  cfg.train.lr = file.get_double("train", "lr", cfg.train.lr);
  cfg.train.beta = file.get_double("train", "beta", cfg.train.beta);

  cfg.min_sep_deg = file.get_double("random", "min_sep_deg", cfg.min_sep_deg);
  cfg.max_abs_elevation_deg = file.get_double("random", "max_abs_elevation_deg",
                                              cfg.max_abs_elevation_deg);

  cfg.config_text = file.text();

  for (int m : cfg.m_values) {
    if (m < 1 || m > cfg.grid.bin_count()) {
      throw std::runtime_error("config: M=" + std::to_string(m) + " outside [1, K=" +
                               std::to_string(cfg.grid.bin_count()) + "]");
    }
  }
  return cfg;
}

/// One jittered light per bin: the bin center displaced by a seeded offset of
/// at most jitter_fraction of the half-cell in each angular axis, so every
/// light stays inside its source bin and each scene covers all K bins.
inline std::vector<UnitVector3> jittered_bin_lights(const LightBinGrid& grid,
                                                    double jitter_fraction,
                                                    std::uint64_t seed) {
  std::vector<UnitVector3> lights;
  Rng rng(mix64(seed ^ 0x6c6967687473ULL));
  const double half_az = grid.azimuth_cell_deg() * 0.5;
  const double half_el = grid.elevation_cell_deg() * 0.5;
  for (int b = 0; b < grid.bin_count(); ++b) {
    SphericalCoord c = grid.center_spherical(b);
    c.azimuth_deg += rng.uniform(-1.0, 1.0) * jitter_fraction * half_az;
    c.elevation_deg += rng.uniform(-1.0, 1.0) * jitter_fraction * half_el;
    lights.push_back(spherical_to_cartesian(c));
  }
  return lights;
}

/// Procedural scene family: shapes, materials, and albedo patterns rotate
/// through the scene index so the set mixes diffuse and glossy surfaces.
inline SceneSpec scenario_scene_spec(const ExperimentConfig& cfg, int index) {
  SceneSpec spec;
  spec.height = cfg.scene_height;
  spec.width = cfg.scene_width;
  spec.seed = mix64(cfg.scene_seed + static_cast<std::uint64_t>(index) * 7919ULL);
  spec.noise_sigma = cfg.noise_sigma;
  spec.cast_shadows = cfg.cast_shadows;
  spec.mask_fraction = cfg.mask_fraction;
  if (cfg.shapes == "sphere") {
    spec.shape = ShapeKind::kSphere;
  } else if (cfg.shapes == "bumps") {
    spec.shape = ShapeKind::kGaussianBumps;
  } else if (cfg.shapes == "mixed") {
    spec.shape = index % 2 == 0 ? ShapeKind::kSphere : ShapeKind::kGaussianBumps;
  } else {
    throw std::runtime_error("config: shapes must be sphere, bumps, or mixed, got '" +
                             cfg.shapes + "'");
  }
  if (cfg.specular_every > 0 && index % cfg.specular_every == cfg.specular_every - 1) {
    spec.specular_strength = cfg.specular_strength;
    spec.specular_exponent = cfg.specular_exponent;
  }
  switch (index % 3) {
    case 0: spec.albedo_pattern = AlbedoPattern::kUniform; break;
    case 1: spec.albedo_pattern = AlbedoPattern::kChecker; break;
    default: spec.albedo_pattern = AlbedoPattern::kSpeckle; break;
  }
  const double tint = 0.85 + 0.15 * to_unit_double(mix64(spec.seed ^ 0x74696e74ULL));
  spec.albedo = {cfg.albedo, cfg.albedo * tint, cfg.albedo * (2.0 - tint) * 0.5 + cfg.albedo * 0.5};
  for (double& a : spec.albedo) a = std::min(a, 1.0);
  return spec;
}

inline std::vector<BinnedScene> make_scenario_scenes(const ExperimentConfig& cfg) {
  std::vector<BinnedScene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.scene_count));
  for (int i = 0; i < cfg.scene_count; ++i) {
    const SceneSpec spec = scenario_scene_spec(cfg, i);
    const auto lights = jittered_bin_lights(
        cfg.grid, cfg.jitter_fraction,
        mix64(cfg.scene_seed ^ (0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(i))));
    scenes.push_back(bin_scene(render_dataset(spec, lights), cfg.grid));
  }
  return scenes;
}

struct ExperimentCell {
  std::uint64_t seed = 0;
  int m = 0;
  PlanResult result;
  std::string error;  // nonempty when the cell failed
};

struct ExperimentOutcome {
  std::vector<ExperimentCell> cells;
  nlohmann::ordered_json report;
  bool ok = true;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Runs the full grid of (seed, M, method) cells: renders the scenario once,
/// trains where "learned" is requested, plans and scores every method, and
/// writes report.json, tables.csv, and mae_vs_m.svg into the output
/// directory. Timing never enters report.json so reruns stay byte-identical.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  fs::create_directories(cfg.output_dir);

  ExperimentOutcome out;
  const std::vector<BinnedScene> scenes = make_scenario_scenes(cfg);
  std::vector<UnitVector3> all_lights;
  for (const auto& s : scenes) {
    all_lights.insert(all_lights.end(), s.sample.lights.begin(), s.sample.lights.end());
  }

  const std::vector<std::uint64_t> seeds = cfg.run_seeds();
  // The oracle and the orthogonal triple do not depend on the run seed; plan
  // them once per M and reuse the indices across seeds.
  std::map<std::pair<int, std::string>, std::vector<int>> fixed_plans;
  for (int m : cfg.m_values) {
    for (std::uint64_t seed : seeds) {
      for (const std::string& method : cfg.methods) {
        ExperimentCell cell;
        cell.seed = seed;
        cell.m = m;
        cell.result.method = method;
        const auto t0 = clock::now();
        try {
          const NormalNetParams* net_params = nullptr;
          NormalNetParams trained_params;
          if (method == "learned") {
            TrainConfig tc = cfg.train;
            tc.m = m;
            tc.seed = seed;
            const TrainResult tr = fit(scenes, tc);
            cell.result.bin_indices = tr.hardened_bins();
            trained_params = tr.params;
            net_params = &trained_params;
          } else if (method == "random") {
            cell.result.bin_indices = plan_random(cfg.grid, m, cfg.min_sep_deg, seed,
                                                  cfg.max_abs_elevation_deg);
          } else if (method == "kmeans") {
            cell.result.bin_indices = plan_kmeans(cfg.grid, all_lights, m, seed);
          } else if (method == "ortho3") {
            if (m != 3) throw std::runtime_error("ortho3 is defined only for M=3");
            auto& cached = fixed_plans[{m, method}];
            if (cached.empty()) cached = plan_orthogonal_triplet(cfg.grid).bin_indices;
            cell.result.bin_indices = cached;
          } else if (method == "exhaustive") {
            auto& cached = fixed_plans[{m, method}];
            if (cached.empty()) {
              cached = plan_exhaustive(scenes, m, EvalBackend::kLeastSquares).best_bins;
            }
            cell.result.bin_indices = cached;
          } else {
            throw std::runtime_error("unknown method '" + method + "'");
          }
          const NormalNetParams* eval_params =
              cfg.backend == EvalBackend::kNormalNet ? net_params : nullptr;
          if (cfg.backend == EvalBackend::kNormalNet && eval_params == nullptr) {
            throw std::runtime_error("net backend requires the learned method's parameters");
          }
          std::vector<int> dedup = cell.result.bin_indices;
          std::sort(dedup.begin(), dedup.end());
          dedup.erase(std::unique(dedup.begin(), dedup.end()), dedup.end());
          cell.result.mae_deg = evaluate_mean_mae(scenes, dedup, cfg.backend, eval_params);
        } catch (const std::exception& e) {
          cell.error = e.what();
          out.ok = false;
        }
        cell.result.wall_time_ms =
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        out.cells.push_back(std::move(cell));
      }
    }
  }

  const std::string hash = config_hash(cfg.config_text);

  nlohmann::ordered_json report;
  report["experiment"] = cfg.name;
  report["config_hash"] = hash;
  report["backend"] = cfg.backend == EvalBackend::kLeastSquares ? "ls" : "net";
  report["grid"] = {{"n_azimuth", cfg.grid.n_azimuth}, {"n_elevation", cfg.grid.n_elevation}};
  report["scene_count"] = cfg.scene_count;
  report["seeds"] = seeds;
  report["m_values"] = cfg.m_values;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& cell : out.cells) {
    nlohmann::ordered_json row;
    row["seed"] = cell.seed;
    row["m"] = cell.m;
    row["method"] = cell.result.method;
    if (cell.error.empty()) {
      row["bin_indices"] = cell.result.bin_indices;
      row["mae_deg"] = cell.result.mae_deg;
    } else {
      row["error"] = cell.error;
    }
    rows.push_back(std::move(row));
  }
  report["rows"] = std::move(rows);

  auto summary = nlohmann::ordered_json::array();
  std::map<std::string, std::vector<std::pair<int, double>>> curves;
  for (int m : cfg.m_values) {
    for (const std::string& method : cfg.methods) {
      std::vector<double> maes;
      for (const auto& cell : out.cells) {
        if (cell.m == m && cell.result.method == method && cell.error.empty()) {
          maes.push_back(cell.result.mae_deg);
        }
      }
      if (maes.empty()) continue;
      const double med = detail::median(maes);
      summary.push_back({{"m", m},
                         {"method", method},
                         {"median_mae_deg", med},
                         {"runs", maes.size()}});
      curves[method].emplace_back(m, med);
    }
  }
  report["summary"] = std::move(summary);
  report["config"] = cfg.config_text;
  out.report = report;

  std::ofstream rj((fs::path(cfg.output_dir) / "report.json").string());
  if (!rj) throw std::runtime_error("run_experiment: cannot write report.json");
  rj << report.dump(2) << "\n";

  {
    std::vector<PlanResult> table_rows;
    std::ofstream csv((fs::path(cfg.output_dir) / "tables.csv").string());
    if (!csv) throw std::runtime_error("run_experiment: cannot write tables.csv");
    csv << "# config_hash=" << hash << "\n";
    csv << "seed,m,method,bin_indices,mae_deg,wall_time_ms,error\n";
    csv.precision(10);
    for (const auto& cell : out.cells) {
      csv << cell.seed << "," << cell.m << "," << cell.result.method << ",";
      for (std::size_t j = 0; j < cell.result.bin_indices.size(); ++j) {
        csv << (j ? ";" : "") << cell.result.bin_indices[j];
      }
      csv << "," << cell.result.mae_deg << "," << cell.result.wall_time_ms << ","
          << cell.error << "\n";
    }
  }

  if (!curves.empty()) {
    write_mae_vs_m_svg((fs::path(cfg.output_dir) / "mae_vs_m.svg").string(), curves);
  }
  return out;
}

}  // namespace lightplan
