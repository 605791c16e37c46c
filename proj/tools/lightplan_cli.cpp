// Command-line front end: render synthetic photometric-stereo datasets,
// assign lights to hemisphere bins, train the selection + normal-regression
// pair, plan light configurations with the baseline heuristics or the
// brute-force oracle, evaluate configurations, and drive full experiments.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lightplan/config.hpp"
#include "lightplan/dataset.hpp"
#include "lightplan/experiment.hpp"
#include "lightplan/planner.hpp"
#include "lightplan/psolve.hpp"
#include "lightplan/render.hpp"
#include "lightplan/selector.hpp"
#include "lightplan/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lightplan;

SceneSpec scene_spec_from_config(const ConfigFile& file) {
  // Keys may sit in a [scene] section or at top level.
  const std::string sec = file.has("scene", "height") || file.has("scene", "shape")
                              ? "scene"
                              : "";
  SceneSpec spec;
  const std::string shape = file.get_string(sec, "shape", "sphere");
  if (shape == "sphere") spec.shape = ShapeKind::kSphere;
  else if (shape == "bumps") spec.shape = ShapeKind::kGaussianBumps;
  else throw std::runtime_error("scene config: shape must be sphere or bumps, got '" + shape + "'");
  spec.height = file.get_int(sec, "height", spec.height);
  spec.width = file.get_int(sec, "width", spec.width);
  const double albedo = file.get_double(sec, "albedo", 0.8);
  spec.albedo = {albedo, albedo, albedo};
  const std::string pattern = file.get_string(sec, "albedo_pattern", "uniform");
  if (pattern == "uniform") spec.albedo_pattern = AlbedoPattern::kUniform;
  else if (pattern == "checker") spec.albedo_pattern = AlbedoPattern::kChecker;
  else if (pattern == "speckle") spec.albedo_pattern = AlbedoPattern::kSpeckle;
  else throw std::runtime_error("scene config: unknown albedo_pattern '" + pattern + "'");
  spec.specular_strength = file.get_double(sec, "specular_strength", spec.specular_strength);
  spec.specular_exponent = file.get_double(sec, "specular_exponent", spec.specular_exponent);
  spec.noise_sigma = file.get_double(sec, "noise_sigma", spec.noise_sigma);
  spec.cast_shadows = file.get_bool(sec, "cast_shadows", spec.cast_shadows);
  spec.seed = seed_from_env(file.get_u64(sec, "seed", spec.seed));
  spec.sphere_radius = file.get_double(sec, "sphere_radius", spec.sphere_radius);
  spec.mask_fraction = file.get_double(sec, "mask_fraction", spec.mask_fraction);
  spec.bump_count = file.get_int(sec, "bump_count", spec.bump_count);
  return spec;
}

std::vector<BinnedScene> load_binned(const std::vector<std::string>& dirs,
                                     const LightBinGrid& grid) {
  std::vector<BinnedScene> scenes;
  for (const auto& dir : dirs) scenes.push_back(bin_scene(load_dataset(dir), grid));
  return scenes;
}

int cmd_render(const std::string& scene_path, const std::string& lights_path,
               const std::string& out_dir) {
  const SceneSpec spec = scene_spec_from_config(ConfigFile::parse_file(scene_path));
  const std::vector<UnitVector3> lights = read_lights(lights_path);
  const RenderedSample sample = render_dataset(spec, lights);
  save_dataset(out_dir, sample);
  std::cout << "rendered " << sample.images.size() << " images (" << spec.width << "x"
            << spec.height << ") to " << out_dir << "\n";
  return 0;
}

int cmd_assign(const std::string& lights_path, int k_az, int k_el, bool unique,
               const std::string& out_path) {
  const LightBinGrid grid = make_grid(k_az, k_el);
  const std::vector<UnitVector3> lights = read_lights(lights_path);
  const BinAssignment a = assign_lights(grid, lights, unique);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("assign: cannot open " + out_path);
  out << "bin_index,light_index,residual_deg\n";
  out.precision(10);
  for (std::size_t bin = 0; bin < a.pairs.size(); ++bin) {
    if (a.pairs[bin] == kUnassigned) continue;
    out << bin << "," << a.pairs[bin] << "," << a.residual_angles_deg[bin] << "\n";
  }
  const int unassigned = grid.bin_count() - static_cast<int>(a.assigned_count());
  std::cout << a.assigned_count() << " of " << grid.bin_count() << " bins assigned";
  if (unassigned > 0) std::cout << " (" << unassigned << " unassigned)";
  std::cout << ", written to " << out_path << "\n";
  return 0;
}

int cmd_train(const std::vector<std::string>& dataset_dirs, int m, int k_az, int k_el,
              TrainConfig tc, const std::string& out_path) {
  const LightBinGrid grid = make_grid(k_az, k_el);
  const std::vector<BinnedScene> scenes = load_binned(dataset_dirs, grid);
  tc.m = m;
  tc.seed = seed_from_env(tc.seed);
  const TrainResult tr = fit(scenes, tc);

  LearnedConfig cfg;
  cfg.grid = grid;
  cfg.m = m;
  cfg.beta = tc.beta;
  cfg.bin_indices = tr.hardened_bins();
  save_config(out_path, cfg);

  const fs::path out(out_path);
  const fs::path evo = out.parent_path() / (out.stem().string() + "_evolution.csv");
  write_evolution_csv(evo.string(), evolution_report(tr.checkpoints, tc.beta, tr.active_bins));
  const fs::path params = out.parent_path() / (out.stem().string() + "_params");
  save_params(params.string(), tr.params);

  const auto dup = harden(tr.selection).duplicates;
  for (const auto& d : dup) {
    std::cerr << "warning: selection columns " << d.column_a << " and " << d.column_b
              << " both hardened to bin " << tr.active_bins[static_cast<std::size_t>(d.bin)]
              << " (under-trained selection)\n";
  }
  std::cout << "trained M=" << m << " selection over K=" << grid.bin_count() << " bins: [";
  for (std::size_t i = 0; i < cfg.bin_indices.size(); ++i) {
    std::cout << (i ? ", " : "") << cfg.bin_indices[i];
  }
  std::cout << "] -> " << out_path << "\n";
  return 0;
}

int cmd_plan(const std::string& method, const std::vector<std::string>& dataset_dirs, int m,
             int k_az, int k_el, std::uint64_t seed, double min_sep_deg,
             double max_abs_el_deg, const std::string& selector_config,
             const std::string& out_path) {
  const LightBinGrid grid = make_grid(k_az, k_el);
  seed = seed_from_env(seed);
  const std::vector<BinnedScene> scenes = load_binned(dataset_dirs, grid);

  PlanResult result;
  result.method = method;
  const auto t0 = std::chrono::steady_clock::now();
  if (method == "random") {
    result.bin_indices = plan_random(grid, m, min_sep_deg, seed, max_abs_el_deg);
  } else if (method == "kmeans") {
    std::vector<UnitVector3> lights;
    for (const auto& s : scenes) {
      lights.insert(lights.end(), s.sample.lights.begin(), s.sample.lights.end());
    }
    result.bin_indices = plan_kmeans(grid, lights, m, seed);
  } else if (method == "ortho3") {
    if (m != 3) throw std::runtime_error("plan: ortho3 is defined only for M=3");
    const OrthoTripletResult r = plan_orthogonal_triplet(grid);
    if (r.relaxed) {
      std::cerr << "warning: no bin triple within the orthogonality window; "
                   "using the best available spread\n";
    }
    result.bin_indices = r.bin_indices;
  } else if (method == "exhaustive") {
    result.bin_indices = plan_exhaustive(scenes, m, EvalBackend::kLeastSquares).best_bins;
  } else if (method == "learned") {
    if (selector_config.empty()) {
      throw std::runtime_error("plan: --selector-config is required for method learned "
                               "(produce it with the train subcommand)");
    }
    const LearnedConfig cfg = load_config(selector_config);
    if (cfg.grid.n_azimuth != grid.n_azimuth || cfg.grid.n_elevation != grid.n_elevation) {
      throw std::runtime_error("plan: selector config grid does not match --k-az/--k-el");
    }
    result.bin_indices = cfg.bin_indices;
  } else {
    throw std::runtime_error("plan: unknown method '" + method + "'");
  }
  result.mae_deg = evaluate_mean_mae(scenes, result.bin_indices, EvalBackend::kLeastSquares);
  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::ordered_json j;
  j["method"] = result.method;
  j["m"] = m;
  j["bin_indices"] = result.bin_indices;
  j["mae_deg"] = result.mae_deg;
  j["wall_time_ms"] = result.wall_time_ms;
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("plan: cannot open " + out_path);
  out << j.dump(2) << "\n";
  std::cout << method << " M=" << m << " mae=" << result.mae_deg << " deg -> " << out_path
            << "\n";
  return 0;
}

int cmd_eval(const std::vector<std::string>& dataset_dirs, const std::string& config_path,
             const std::string& backend_name, const std::string& params_base,
             const std::string& out_path) {
  const LearnedConfig cfg = load_config(config_path);
  const std::vector<BinnedScene> scenes = load_binned(dataset_dirs, cfg.grid);
  EvalBackend backend;
  if (backend_name == "ls") backend = EvalBackend::kLeastSquares;
  else if (backend_name == "net") backend = EvalBackend::kNormalNet;
  else throw std::runtime_error("eval: backend must be ls or net, got '" + backend_name + "'");

  NormalNetParams params;
  const NormalNetParams* params_ptr = nullptr;
  if (backend == EvalBackend::kNormalNet) {
    if (params_base.empty()) {
      throw std::runtime_error("eval: --params is required with the net backend");
    }
    params = load_params(params_base);
    params_ptr = &params;
  }

  double mae_sum = 0.0;
  std::size_t n_pixels = 0;
  int n_degenerate = 0;
  for (const auto& scene : scenes) {
    const EvalResult r = evaluate_configuration(scene, cfg.bin_indices, backend, params_ptr);
    mae_sum += r.mae_deg;
    n_pixels += r.n_pixels;
    n_degenerate += r.n_degenerate;
  }

  nlohmann::ordered_json j;
  j["mae_deg"] = mae_sum / static_cast<double>(scenes.size());
  j["n_pixels"] = n_pixels;
  j["n_degenerate"] = n_degenerate;
  j["bin_indices"] = cfg.bin_indices;
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("eval: cannot open " + out_path);
  out << j.dump(2) << "\n";
  std::cout << "mae=" << j["mae_deg"].get<double>() << " deg over " << scenes.size()
            << " dataset(s) -> " << out_path << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_csv,
               const std::string& out_svg) {
  std::vector<PlanResult> rows;
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("report: " + path + ": " + e.what());
    }
    PlanResult r;
    r.method = j.at("method").get<std::string>();
    r.bin_indices = j.at("bin_indices").get<std::vector<int>>();
    r.mae_deg = j.at("mae_deg").get<double>();
    r.wall_time_ms = j.value("wall_time_ms", 0.0);
    series[r.method].emplace_back(j.value("m", static_cast<int>(r.bin_indices.size())),
                                  r.mae_deg);
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PlanResult& a, const PlanResult& b) { return a.mae_deg < b.mae_deg; });
  if (!out_csv.empty()) write_compare_csv(out_csv, rows);
  if (!out_svg.empty()) {
    for (auto& [name, pts] : series) std::sort(pts.begin(), pts.end());
    write_mae_vs_m_svg(out_svg, series);
  }
  std::cout << "merged " << rows.size() << " plan result(s)";
  if (!out_csv.empty()) std::cout << " -> " << out_csv;
  if (!out_svg.empty()) std::cout << ", " << out_svg;
  std::cout << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = parse_experiment(ConfigFile::parse_file(config_path));
  if (!out_override.empty()) cfg.output_dir = out_override;
  const ExperimentOutcome outcome = run_experiment(cfg);
  int failed = 0;
  for (const auto& cell : outcome.cells) {
    if (!cell.error.empty()) {
      ++failed;
      std::cerr << "cell failed: seed=" << cell.seed << " m=" << cell.m << " method="
                << cell.result.method << ": " << cell.error << "\n";
    }
  }
  std::cout << outcome.cells.size() - failed << "/" << outcome.cells.size()
            << " cells completed; artifacts in " << cfg.output_dir << "\n";
  return outcome.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Light configuration planning for photometric stereo"};
  app.require_subcommand(1);

  // render
  std::string scene_path, lights_path, out_dir;
  auto* render = app.add_subcommand("render", "Render a synthetic dataset directory");
  render->add_option("--scene", scene_path, "Scene config file (key=value)")->required();
  render->add_option("--lights", lights_path, "Lights text file (lx ly lz per line)")->required();
  render->add_option("--out", out_dir, "Output dataset directory")->required();

  // assign
  std::string assign_lights_path, assign_out;
  int assign_kaz = 8, assign_kel = 6;
  bool assign_no_unique = false;
  auto* assign = app.add_subcommand("assign", "Assign lights to hemisphere bins");
  assign->add_option("--lights", assign_lights_path, "Lights text file")->required();
  assign->add_option("--k-az", assign_kaz, "Azimuth bin count")->capture_default_str();
  assign->add_option("--k-el", assign_kel, "Elevation bin count")->capture_default_str();
  assign->add_flag("--no-unique", assign_no_unique,
                   "Allow one light to serve multiple bins");
  assign->add_option("--out", assign_out, "Assignment CSV path")->required();

  // train
  std::vector<std::string> train_dirs;
  int train_m = 3, train_kaz = 8, train_kel = 6;
  TrainConfig train_cfg;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train the selection and normal nets");
  train->add_option("--dataset-dir", train_dirs, "Dataset directory (repeatable)")->required();
  train->add_option("--m", train_m, "Number of lights to select")->required();
  train->add_option("--k-az", train_kaz, "Azimuth bin count")->capture_default_str();
  train->add_option("--k-el", train_kel, "Elevation bin count")->capture_default_str();
  train->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train->add_option("--early-stop", train_cfg.early_stop_epoch,
                    "Stop after this epoch (0 = run all epochs)")->capture_default_str();
  train->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  train->add_option("--pixels-per-draw", train_cfg.pixels_per_draw)->capture_default_str();
  train->add_option("--steps-per-epoch", train_cfg.steps_per_epoch)->capture_default_str();
  train->add_option("--beta", train_cfg.beta, "Annealing constant")->capture_default_str();
  train->add_option("--lr", train_cfg.lr, "Learning rate")->capture_default_str();
  train->add_option("--seed", train_cfg.seed)->capture_default_str();
  train->add_option("--out", train_out, "Learned configuration JSON path")->required();

  // plan
  std::string plan_method, plan_out, plan_selector_config;
  std::vector<std::string> plan_dirs;
  int plan_m = 3, plan_kaz = 8, plan_kel = 6;
  std::uint64_t plan_seed = 0;
  double plan_min_sep = 20.0, plan_max_el = 75.0;
  auto* plan = app.add_subcommand("plan", "Plan a light configuration");
  plan->add_option("--method", plan_method, "random|kmeans|ortho3|exhaustive|learned")
      ->required();
  plan->add_option("--dataset-dir", plan_dirs, "Dataset directory (repeatable)")->required();
  plan->add_option("--m", plan_m, "Number of lights")->required();
  plan->add_option("--k-az", plan_kaz)->capture_default_str();
  plan->add_option("--k-el", plan_kel)->capture_default_str();
  plan->add_option("--seed", plan_seed)->capture_default_str();
  plan->add_option("--min-sep-deg", plan_min_sep, "Random planner separation threshold")
      ->capture_default_str();
  plan->add_option("--max-abs-elevation-deg", plan_max_el,
                   "Random planner elevation margin")->capture_default_str();
  plan->add_option("--selector-config", plan_selector_config,
                   "Trained configuration JSON (for method learned)");
  plan->add_option("--out", plan_out, "PlanResult JSON path")->required();

  // eval
  std::vector<std::string> eval_dirs;
  std::string eval_config, eval_backend = "ls", eval_params, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a configuration on datasets");
  eval->add_option("--dataset-dir", eval_dirs, "Dataset directory (repeatable)")->required();
  eval->add_option("--config", eval_config, "Learned configuration JSON")->required();
  eval->add_option("--backend", eval_backend, "ls|net")->capture_default_str();
  eval->add_option("--params", eval_params, "Net parameter base path (for net backend)");
  eval->add_option("--out", eval_out, "Report JSON path")->required();

  // report
  std::vector<std::string> report_inputs;
  std::string report_csv, report_svg;
  auto* report = app.add_subcommand("report", "Merge plan results into CSV and SVG");
  report->add_option("--in", report_inputs, "PlanResult JSON (repeatable)")->required();
  report->add_option("--out-csv", report_csv, "Merged CSV path");
  report->add_option("--out-svg", report_svg, "MAE-vs-M SVG path");

  // run
  std::string run_config, run_out;
  auto* run = app.add_subcommand("run", "Run a full experiment from a config file");
  run->add_option("--config", run_config, "Experiment config file")->required();
  run->add_option("--out", run_out, "Override the configured output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (render->parsed()) return cmd_render(scene_path, lights_path, out_dir);
    if (assign->parsed()) {
      return cmd_assign(assign_lights_path, assign_kaz, assign_kel, !assign_no_unique,
                        assign_out);
    }
    if (train->parsed()) {
      return cmd_train(train_dirs, train_m, train_kaz, train_kel, train_cfg, train_out);
    }
    if (plan->parsed()) {
      return cmd_plan(plan_method, plan_dirs, plan_m, plan_kaz, plan_kel, plan_seed,
                      plan_min_sep, plan_max_el, plan_selector_config, plan_out);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_dirs, eval_config, eval_backend, eval_params, eval_out);
    }
    if (report->parsed()) return cmd_report(report_inputs, report_csv, report_svg);
    if (run->parsed()) return cmd_run(run_config, run_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
