#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightplan/dataset.hpp"
#include "lightplan/normalnet.hpp"
#include "lightplan/selector.hpp"
#include "lightplan/tensor.hpp"

namespace lightplan {

struct TrainConfig {
  int m = 3;
  int k = 0;                   // expected bin count; 0 = take from the dataset grid
  int epochs = 30;
  int early_stop_epoch = 10;   // stop after this epoch; 0 trains all epochs
  int batch_size = 32;         // scene-pixel draws per optimization step
  int pixels_per_draw = 1024;  // masked pixels sampled per draw
  int steps_per_epoch = 1;
  double lr = 1e-4;
  double beta = 10.0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  int epoch = 0;
  Matrix selection_w;
  NormalNetParams params;
  double loss = 0.0;
  std::vector<int> hardened_bins;  // grid bin ids, one per selection column
};

struct TrainResult {
  SelectionMatrix selection;
  NormalNetParams params;
  std::vector<Checkpoint> checkpoints;
  std::vector<int> active_bins;  // selection row -> grid bin id

  std::vector<int> hardened_bins() const {
    std::vector<int> bins;
    for (int row : harden(selection).bin_indices) {
      bins.push_back(active_bins[static_cast<std::size_t>(row)]);
    }
    return bins;
  }
};

namespace detail {

/// Columns of V for one draw: per active bin, the scene's image-light pair
/// gathered over the drawn pixels, flattened to (6q) x 1 blocks.
inline Matrix build_input_stack(const BinnedScene& scene,
                                const std::vector<int>& active_bins,
                                const std::vector<std::pair<int, int>>& pixels) {
  const Eigen::Index q = static_cast<Eigen::Index>(pixels.size());
  Matrix v(6 * q, static_cast<Eigen::Index>(active_bins.size()));
  for (std::size_t j = 0; j < active_bins.size(); ++j) {
    const int li = scene.bin_to_light[static_cast<std::size_t>(active_bins[j])];
    const Image& img = scene.sample.images[static_cast<std::size_t>(li)];
    const UnitVector3& l = scene.sample.lights[static_cast<std::size_t>(li)];
    for (Eigen::Index p = 0; p < q; ++p) {
      const auto [y, x] = pixels[static_cast<std::size_t>(p)];
      v(6 * p + 0, static_cast<Eigen::Index>(j)) = img.at(y, x, 0);
      v(6 * p + 1, static_cast<Eigen::Index>(j)) = img.at(y, x, img.channels > 1 ? 1 : 0);
      v(6 * p + 2, static_cast<Eigen::Index>(j)) = img.at(y, x, img.channels > 2 ? 2 : 0);
      v(6 * p + 3, static_cast<Eigen::Index>(j)) = l.x;
      v(6 * p + 4, static_cast<Eigen::Index>(j)) = l.y;
      v(6 * p + 5, static_cast<Eigen::Index>(j)) = l.z;
    }
  }
  return v;
}

}  // namespace detail

/// Joint training: every step soft-selects M mixed image-light inputs from
/// the K bins, regresses normals, and updates both the selection weights and
/// the net under one Adam schedule. The softmax temperature anneals with the
/// epoch index, so selections sharpen toward one-hot as training proceeds.
inline TrainResult fit(const std::vector<BinnedScene>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");
  if (cfg.epochs < 1) throw std::invalid_argument("fit: epochs must be >= 1");
  if (cfg.m < 1) throw std::invalid_argument("fit: M must be >= 1");
  if (cfg.batch_size < 1 || cfg.pixels_per_draw < 1 || cfg.steps_per_epoch < 1) {
    throw std::invalid_argument("fit: batch_size, pixels_per_draw, steps_per_epoch must be >= 1");
  }

  const std::vector<int> active_bins = dataset.front().covered_bins();
  for (const auto& scene : dataset) {
    if (scene.grid.n_azimuth != dataset.front().grid.n_azimuth ||
        scene.grid.n_elevation != dataset.front().grid.n_elevation) {
      throw std::runtime_error("fit: scenes use different bin grids");
    }
    if (scene.covered_bins() != active_bins) {
      throw std::runtime_error(
          "fit: inconsistent bin coverage across scenes; every scene must cover the "
          "same bins");
    }
  }
  if (cfg.k != 0 && cfg.k != dataset.front().grid.bin_count()) {
    throw std::invalid_argument("fit: config K=" + std::to_string(cfg.k) +
                                " but dataset grid has " +
                                std::to_string(dataset.front().grid.bin_count()) + " bins");
  }
  const int kp = static_cast<int>(active_bins.size());
  if (cfg.m > kp) {
    throw std::invalid_argument("fit: M=" + std::to_string(cfg.m) + " exceeds the " +
                                std::to_string(kp) + " covered bins");
  }

  TrainResult res;
  res.active_bins = active_bins;
  res.selection = SelectionMatrix(kp, cfg.m, cfg.beta);
  res.params = init_params(cfg.seed);

  std::vector<std::vector<std::pair<int, int>>> scene_pixels;
  scene_pixels.reserve(dataset.size());
  for (const auto& scene : dataset) {
    scene_pixels.push_back(masked_pixels(scene.sample.mask));
    if (scene_pixels.back().empty()) throw std::runtime_error("fit: scene with empty mask");
  }

  AdamState w_state;
  std::vector<AdamState> ew_state(res.params.extractor_w.size());
  std::vector<AdamState> eb_state(res.params.extractor_b.size());
  std::vector<AdamState> hw_state(res.params.head_w.size());
  std::vector<AdamState> hb_state(res.params.head_b.size());

  Rng rng(mix64(cfg.seed ^ 0x747261696e6572ULL));
  const int last_epoch =
      cfg.early_stop_epoch > 0 ? std::min(cfg.early_stop_epoch, cfg.epochs) : cfg.epochs;

  // One optimization step averages the loss over batch_size draws. Each draw
  // gets its own tape (forward + backward, then freed) and the gradients are
  // summed outside; identical math to one big batch graph at a fraction of
  // the peak memory.
  struct GradAccum {
    Matrix w;
    std::vector<Matrix> ew, eb, hw, hb;
  };

  for (int epoch = 1; epoch <= last_epoch; ++epoch) {
    const double alpha = anneal_alpha(epoch, cfg.beta);
    double epoch_loss = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      GradAccum g;
      g.w = Matrix::Zero(res.selection.W.rows(), res.selection.W.cols());
      for (const auto& m : res.params.extractor_w) g.ew.push_back(Matrix::Zero(m.rows(), m.cols()));
      for (const auto& m : res.params.extractor_b) g.eb.push_back(Matrix::Zero(m.rows(), m.cols()));
      for (const auto& m : res.params.head_w) g.hw.push_back(Matrix::Zero(m.rows(), m.cols()));
      for (const auto& m : res.params.head_b) g.hb.push_back(Matrix::Zero(m.rows(), m.cols()));
      double step_loss = 0.0;

      for (int draw = 0; draw < cfg.batch_size; ++draw) {
        const std::size_t s = rng.below(dataset.size());
        const auto& pix_pool = scene_pixels[s];
        std::vector<std::pair<int, int>> pixels(static_cast<std::size_t>(cfg.pixels_per_draw));
        for (auto& p : pixels) p = pix_pool[rng.below(pix_pool.size())];

        Tape t;
        const NodeId w_node = t.input(res.selection.W, true);
        const NodeId w_soft = t.softmax_columns(w_node, alpha);
        const NetNodes net = register_params(t, res.params);
        const NodeId v = t.input(detail::build_input_stack(dataset[s], active_bins, pixels));
        const NodeId vhat = t.matmul(v, w_soft);
        std::vector<NodeId> inputs;
        inputs.reserve(static_cast<std::size_t>(cfg.m));
        for (int j = 0; j < cfg.m; ++j) {
          inputs.push_back(t.reshape(t.slice_columns(vhat, j, 1), cfg.pixels_per_draw, 6));
        }
        const Matrix targets = gather_normals(dataset[s].sample.normals_gt, pixels);
        const NodeId pred = forward_normals(t, inputs, net);
        const NodeId loss = normal_loss_node(t, pred, targets);
        t.backward(loss);
        step_loss += t.value(loss)(0, 0);

        g.w += t.grad(w_node);
        for (std::size_t i = 0; i < g.ew.size(); ++i) {
          g.ew[i] += t.grad(net.extractor_w[i]);
          g.eb[i] += t.grad(net.extractor_b[i]);
        }
        for (std::size_t i = 0; i < g.hw.size(); ++i) {
          g.hw[i] += t.grad(net.head_w[i]);
          g.hb[i] += t.grad(net.head_b[i]);
        }
      }

      const double inv = 1.0 / static_cast<double>(cfg.batch_size);
      epoch_loss += step_loss * inv;
      adam_step(res.selection.W, g.w * inv, w_state, cfg.lr);
      for (std::size_t i = 0; i < g.ew.size(); ++i) {
        adam_step(res.params.extractor_w[i], g.ew[i] * inv, ew_state[i], cfg.lr);
        adam_step(res.params.extractor_b[i], g.eb[i] * inv, eb_state[i], cfg.lr);
      }
      for (std::size_t i = 0; i < g.hw.size(); ++i) {
        adam_step(res.params.head_w[i], g.hw[i] * inv, hw_state[i], cfg.lr);
        adam_step(res.params.head_b[i], g.hb[i] * inv, hb_state[i], cfg.lr);
      }
    }
    res.selection.epoch = epoch;

    Checkpoint cp;
    cp.epoch = epoch;
    cp.selection_w = res.selection.W;
    cp.params = res.params;
    cp.loss = epoch_loss / cfg.steps_per_epoch;
    for (int row : harden(res.selection).bin_indices) {
      cp.hardened_bins.push_back(active_bins[static_cast<std::size_t>(row)]);
    }
    res.checkpoints.push_back(std::move(cp));
  }
  return res;
}

struct EvolutionRow {
  int epoch = 0;
  int column = 0;
  int argmax_bin = 0;
  double max_weight = 0.0;  // max softmax entry of that column at the epoch's alpha
};

/// Fig-style convergence table: how concentrated each selection column is,
/// epoch by epoch.
inline std::vector<EvolutionRow> evolution_report(const std::vector<Checkpoint>& checkpoints,
                                                  double beta,
                                                  const std::vector<int>& active_bins) {
  if (checkpoints.empty()) throw std::invalid_argument("evolution_report: no checkpoints");
  std::vector<EvolutionRow> rows;
  for (const auto& cp : checkpoints) {
    SelectionMatrix sel;
    sel.W = cp.selection_w;
    sel.beta = beta;
    const Matrix soft = soft_weights(sel, cp.epoch);
    for (Eigen::Index j = 0; j < soft.cols(); ++j) {
      EvolutionRow row;
      row.epoch = cp.epoch;
      row.column = static_cast<int>(j);
      Eigen::Index argmax = 0;
      row.max_weight = soft.col(j).maxCoeff(&argmax);
      row.argmax_bin = active_bins[static_cast<std::size_t>(argmax)];
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_evolution_csv(const std::string& path,
                                const std::vector<EvolutionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_evolution_csv: cannot open " + path);
  out << "epoch,column,argmax_bin,max_softmax_weight\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.epoch << "," << r.column << "," << r.argmax_bin << "," << r.max_weight << "\n";
  }
}

}  // namespace lightplan
