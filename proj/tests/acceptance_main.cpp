// Standalone acceptance gate. Each criterion prints one [PASS]/[FAIL] line
// with the measured numbers; the process exits nonzero if any criterion
// fails. Runs on a single core; the slow criteria are the two training
// scenarios.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lightplan/experiment.hpp"
#include "support/assign_reference.hpp"
#include "support/finite_diff.hpp"

using namespace lightplan;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median_of(std::vector<double> v) { return detail::median(std::move(v)); }

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  return ss.str();
}

// ---------------------------------------------------------------------------
// Scenario S1: 4x3 grid (K=12), 8 mixed synthetic scenes, M=3, trained the
// full 30 epochs. Shared between the convergence and oracle criteria.

struct S1Data {
  std::vector<BinnedScene> scenes;
  std::vector<TrainResult> runs;
  std::vector<double> fit_seconds;
  std::vector<double> learned_maes;
  double oracle_mae = 0.0;
  std::vector<int> oracle_bins;
  int early_stop_matches = 0;  // seeds whose epoch-10 pick equals the final pick
};

const S1Data& ensure_s1() {
  static std::optional<S1Data> cache;
  if (cache) return *cache;

  S1Data d;
  ExperimentConfig cfg;
  cfg.grid = make_grid(4, 3);
  cfg.scene_count = 8;
  d.scenes = make_scenario_scenes(cfg);

  TrainConfig tc;
  tc.m = 3;
  tc.epochs = 30;
  tc.early_stop_epoch = 0;  // run every epoch so the anneal finishes
  tc.steps_per_epoch = 6;   // one batch per epoch cannot separate the columns
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    tc.seed = seed;
    const auto t0 = Clock::now();
    d.runs.push_back(fit(d.scenes, tc));
    d.fit_seconds.push_back(seconds_since(t0));
    // A degenerate pick (duplicate collapse, coplanar triple) scores as
    // infinitely bad rather than aborting the criterion.
    double mae = std::numeric_limits<double>::infinity();
    try {
      mae = evaluate_mean_mae(d.scenes, d.runs.back().hardened_bins(),
                              EvalBackend::kLeastSquares);
    } catch (const std::exception&) {
    }
    d.learned_maes.push_back(mae);
    const auto& cps = d.runs.back().checkpoints;
    if (cps[9].hardened_bins == cps[29].hardened_bins) ++d.early_stop_matches;
  }

  const ExhaustiveResult oracle = plan_exhaustive(d.scenes, 3, EvalBackend::kLeastSquares);
  d.oracle_mae = oracle.best_mae;
  d.oracle_bins = oracle.best_bins;
  cache = std::move(d);
  return *cache;
}

// ---------------------------------------------------------------------------
// Criteria

bool c1_ls_exactness(std::string& detail) {
  SceneSpec spec;
  spec.height = 64;
  spec.width = 64;
  spec.mask_fraction = 0.7;  // every masked pixel faces all four lights
  const std::vector<UnitVector3> lights = {
      unit_vector(0, 0, 1), unit_vector(0.6, 0, 0.8), unit_vector(0, 0.6, 0.8),
      normalized(-0.5, 0.5, 0.8)};
  const auto t0 = Clock::now();
  const RenderedSample s = render_dataset(spec, lights);
  const PSResult r = least_squares_normals({s.images, s.lights, s.mask});
  const double mae = mean_angular_error(r.normals, s.normals_gt, s.mask);
  const double secs = seconds_since(t0);
  std::ostringstream ss;
  ss << "mae=" << mae << " deg over " << s.mask.count_on() << " px, " << secs << " s";
  detail = ss.str();
  return mae < 0.1 && secs < 1.0;
}

bool c2_gradients(std::string& detail) {
  const fdcheck::FdReport rep = fdcheck::check_all_gradients();
  std::ostringstream ss;
  ss << "max rel err=" << rep.max_rel_err << " at " << rep.where;
  detail = ss.str();
  return rep.max_rel_err < 1e-4;
}

bool c3_one_hot(std::string& detail) {
  const S1Data& d = ensure_s1();
  const TrainResult& first = d.runs.front();

  const Matrix soft = soft_weights(first.selection, first.selection.epoch);
  double min_col_max = 1.0;
  for (Eigen::Index j = 0; j < soft.cols(); ++j) {
    min_col_max = std::min(min_col_max, soft.col(j).maxCoeff());
  }
  const std::vector<int> bins = first.hardened_bins();
  const bool distinct = std::set<int>(bins.begin(), bins.end()).size() == bins.size();
  const double secs = d.fit_seconds.front();

  std::ostringstream ss;
  ss << "min column max=" << min_col_max << ", bins=[" << join_ints(bins)
     << "], fit=" << secs << " s, epoch10 pick matched final in " << d.early_stop_matches
     << "/5 seeds";
  detail = ss.str();
  return min_col_max > 0.99 && distinct && secs < 900.0;
}

bool c4_oracle_proximity(std::string& detail) {
  const S1Data& d = ensure_s1();
  const double med = median_of(d.learned_maes);
  std::ostringstream ss;
  ss << "median learned=" << med << " deg, oracle=" << d.oracle_mae << " deg (bins=["
     << join_ints(d.oracle_bins) << "]), gap=" << med - d.oracle_mae;
  detail = ss.str();
  return med <= d.oracle_mae + 1.0;
}

bool c5_baseline_ordering(std::string& detail) {
  ExperimentConfig cfg;  // defaults: 8x6 grid, 32x32 scenes
  cfg.scene_count = 12;
  const std::vector<BinnedScene> scenes = make_scenario_scenes(cfg);
  std::vector<UnitVector3> all_lights;
  for (const auto& s : scenes) {
    all_lights.insert(all_lights.end(), s.sample.lights.begin(), s.sample.lights.end());
  }

  TrainConfig tc;
  tc.m = 10;
  tc.epochs = 30;
  tc.early_stop_epoch = 10;
  tc.steps_per_epoch = 6;
  std::vector<double> learned, km, rnd;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    tc.seed = seed;
    // A degenerate learned subset (duplicate bins, coplanar lights) scores
    // as infinitely bad rather than aborting the comparison.
    double lm = std::numeric_limits<double>::infinity();
    try {
      lm = evaluate_mean_mae(scenes, fit(scenes, tc).hardened_bins(),
                             EvalBackend::kLeastSquares);
    } catch (const std::exception&) {
    }
    learned.push_back(lm);
    km.push_back(evaluate_mean_mae(scenes, plan_kmeans(cfg.grid, all_lights, 10, seed),
                                   EvalBackend::kLeastSquares));
    rnd.push_back(evaluate_mean_mae(scenes, plan_random(cfg.grid, 10, cfg.min_sep_deg, seed),
                                    EvalBackend::kLeastSquares));
  }
  const double ml = median_of(learned), mk = median_of(km), mr = median_of(rnd);
  std::ostringstream ss;
  ss << "median mae: learned=" << ml << ", kmeans=" << mk << ", random=" << mr;
  detail = ss.str();
  return ml <= mk && mk <= mr + 0.5;
}

bool c6_orthogonal_vs_clustered(std::string& detail) {
  const LightBinGrid grid = make_grid(8, 6);
  const OrthoTripletResult ortho = plan_orthogonal_triplet(grid);

  std::vector<UnitVector3> lights;
  for (int b : ortho.bin_indices) {
    lights.push_back(grid.bin_centers[static_cast<std::size_t>(b)]);
  }
  // Clustered rival: three directions inside one 22.5 x 30 degree bin.
  lights.push_back(spherical_to_cartesian({93.0, 6.0}));
  lights.push_back(spherical_to_cartesian({101.25, 15.0}));
  lights.push_back(spherical_to_cartesian({109.5, 24.0}));

  // Shrink the mask until even the most oblique light clears every masked
  // normal, so the comparison isolates noise amplification, not shadowing.
  double max_z_angle = 0.0;
  for (const auto& l : lights) {
    max_z_angle = std::max(max_z_angle, angle_between_deg(l, unit_vector(0, 0, 1)));
  }
  SceneSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.noise_sigma = 0.05;
  spec.mask_fraction = std::clamp(std::sin((89.0 - max_z_angle) * kRadPerDeg), 0.15, 0.9);

  bool all_ordered = true;
  double worst_margin = 1e9;
  double ortho_mae = 0.0, clustered_mae = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = 300 + seed;
    const RenderedSample s = render_dataset(spec, lights);
    const auto mae_of = [&](std::size_t lo) {
      const std::vector<Image> imgs(s.images.begin() + lo, s.images.begin() + lo + 3);
      const std::vector<UnitVector3> ls(s.lights.begin() + lo, s.lights.begin() + lo + 3);
      const PSResult r = least_squares_normals({imgs, ls, s.mask});
      return mean_angular_error(r.normals, s.normals_gt, s.mask);
    };
    ortho_mae = mae_of(0);
    clustered_mae = mae_of(3);
    all_ordered = all_ordered && ortho_mae < clustered_mae;
    worst_margin = std::min(worst_margin, clustered_mae - ortho_mae);
  }
  std::ostringstream ss;
  ss << "last seed: ortho=" << ortho_mae << " deg vs clustered=" << clustered_mae
     << " deg; worst margin=" << worst_margin << " deg over 5 seeds, mask="
     << spec.mask_fraction;
  detail = ss.str();
  return all_ordered;
}

bool c7_monotone_in_m(std::string& detail) {
  const LightBinGrid grid = make_grid(3, 2);
  std::vector<UnitVector3> lights;
  for (int b = 0; b < grid.bin_count(); ++b) lights.push_back(grid.bin_centers[b]);

  SceneSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.mask_fraction = 0.3;  // keeps all six oblique lights above the horizon everywhere
  const std::vector<BinnedScene> scenes = {bin_scene(render_dataset(spec, lights), grid)};

  std::vector<double> maes;
  for (int m : {3, 4, 5}) {
    maes.push_back(plan_exhaustive(scenes, m, EvalBackend::kLeastSquares).best_mae);
  }
  std::ostringstream ss;
  ss << "oracle mae by M: " << maes[0] << ", " << maes[1] << ", " << maes[2];
  detail = ss.str();
  return maes[1] <= maes[0] + 1e-9 && maes[2] <= maes[1] + 1e-9;
}

bool c8_assignment_fidelity(std::string& detail) {
  Rng rng(777);
  int exact = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const int n_az = 1 + static_cast<int>(rng.below(9));
    const int n_el = 1 + static_cast<int>(rng.below(7));
    const LightBinGrid grid = make_grid(n_az, n_el);
    const std::size_t count = 1 + rng.below(static_cast<std::uint64_t>(2 * grid.bin_count()));
    std::vector<UnitVector3> lights;
    for (std::size_t i = 0; i < count; ++i) lights.push_back(testsupport::random_upper_light(rng));

    const BinAssignment got = assign_lights(grid, lights, false);
    const BinAssignment want = testsupport::reference_assignment(grid, lights);
    if (got.pairs == want.pairs && got.residual_angles_deg == want.residual_angles_deg) {
      ++exact;
    }
  }
  std::ostringstream ss;
  ss << exact << "/" << trials << " random light sets match the reference loop exactly";
  detail = ss.str();
  return exact == trials;
}

bool c9_loss_identity(std::string& detail) {
  Rng rng(31337);
  double max_gap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const UnitVector3 a = normalized(rng.normal(), rng.normal(), rng.normal());
    const UnitVector3 b = normalized(rng.normal(), rng.normal(), rng.normal());
    const double sq = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                      (a.z - b.z) * (a.z - b.z);
    const double cosform = 2.0 * (1.0 - (a.x * b.x + a.y * b.y + a.z * b.z));
    max_gap = std::max(max_gap, std::abs(sq - cosform));
  }
  std::ostringstream ss;
  ss << "max |sum-of-squares - 2(1-cos)| = " << max_gap << " over 1000 pairs";
  detail = ss.str();
  return max_gap <= 1e-9;
}

bool c10_determinism(std::string& detail) {
  namespace fs = std::filesystem;
  unsetenv("LIPIDS_SEED");
  const fs::path base = fs::temp_directory_path() / "lightplan_acceptance_det";
  fs::remove_all(base);

  const std::string text =
      "[experiment]\n"
      "name = determinism-check\n"
      "seed = 3\n"
      "methods = learned, random, exhaustive\n"
      "m = 3\n"
      "[grid]\n"
      "n_azimuth = 4\n"
      "n_elevation = 2\n"
      "[scenes]\n"
      "count = 2\n"
      "height = 16\n"
      "width = 16\n"
      "[train]\n"
      "epochs = 10\n"
      "batch_size = 4\n"
      "pixels_per_draw = 64\n"
      "steps_per_epoch = 8\n";
  ExperimentConfig cfg = parse_experiment(ConfigFile::parse_text(text));

  const auto read_all = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  cfg.output_dir = (base / "a").string();
  const ExperimentOutcome a = run_experiment(cfg);
  cfg.output_dir = (base / "b").string();
  const ExperimentOutcome b = run_experiment(cfg);

  const std::string ra = read_all(base / "a" / "report.json");
  const std::string rb = read_all(base / "b" / "report.json");
  std::ostringstream ss;
  ss << "two runs, report.json " << ra.size() << " bytes, byte-identical="
     << (ra == rb ? "yes" : "no") << ", cells ok=" << (a.ok && b.ok ? "yes" : "no");
  detail = ss.str();
  return a.ok && b.ok && !ra.empty() && ra == rb;
}

struct Criterion {
  int id;
  const char* label;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  // Optional args select a subset of criteria by id, e.g. "6 7 10".
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "least-squares exactness on a clean sphere", c1_ls_exactness},
      {2, "tensor gradients match finite differences", c2_gradients},
      {3, "annealed selection converges to one-hot", c3_one_hot},
      {4, "learned subset near the exhaustive optimum", c4_oracle_proximity},
      {5, "learned <= kmeans <= random ordering", c5_baseline_ordering},
      {6, "orthogonal triple beats a clustered triple", c6_orthogonal_vs_clustered},
      {7, "oracle error nonincreasing in M", c7_monotone_in_m},
      {8, "non-unique assignment matches reference loop", c8_assignment_fidelity},
      {9, "squared loss equals the cosine form", c9_loss_identity},
      {10, "identical seeds give byte-identical reports", c10_determinism},
  };

  int passed = 0;
  int total = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++total;
    std::string detail;
    bool ok = false;
    const auto t0 = Clock::now();
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    std::printf("[%s] %02d %s (%s) [%.1f s]\n", ok ? "PASS" : "FAIL", c.id, c.label,
                detail.c_str(), secs);
    std::fflush(stdout);
    if (ok) ++passed;
  }
  std::printf("%d/%d acceptance criteria passed\n", passed, total);
  return passed == total ? 0 : 1;
}
