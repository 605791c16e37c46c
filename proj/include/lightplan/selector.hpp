#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lightplan/lightspace.hpp"
#include "lightplan/tensor.hpp"

namespace lightplan {

/// Annealing schedule for the selection softmax: alpha_r = beta * r^2.
inline double anneal_alpha(int epoch, double beta) {
  if (epoch < 1) {
    throw std::out_of_range("anneal_alpha: epoch must be >= 1, got " + std::to_string(epoch));
  }
  return beta * static_cast<double>(epoch) * static_cast<double>(epoch);
}

/// Learnable K x M selection weights. Each column, pushed through an annealed
/// softmax, is a soft choice of one of the K input columns; annealing drives
/// every column toward one-hot as epochs advance.
struct SelectionMatrix {
  Matrix W;
  double beta = 10.0;
  int epoch = 1;

  SelectionMatrix() = default;
  SelectionMatrix(int k, int m, double beta_in = 10.0)
      : W(Matrix::Ones(k, m)), beta(beta_in) {
    if (k < 1 || m < 1) throw std::invalid_argument("selection matrix: K and M must be >= 1");
    if (m > k) {
      throw std::invalid_argument("selection matrix: M=" + std::to_string(m) +
                                  " exceeds K=" + std::to_string(k));
    }
  }

  int k() const { return static_cast<int>(W.rows()); }
  int m() const { return static_cast<int>(W.cols()); }
};

/// Paired image-light columns for one scene: column j holds image j's masked
/// pixels as (r,g,b,lx,ly,lz) blocks, one block per pixel, so V is (6q) x K.
struct InputStack {
  Matrix V;
  int pixel_count = 0;

  int k() const { return static_cast<int>(V.cols()); }
};

/// Soft weights at a given epoch: column softmax of alpha_r * W.
inline Matrix soft_weights(const SelectionMatrix& sel, int epoch) {
  const double a = anneal_alpha(epoch, sel.beta);
  Matrix y(sel.W.rows(), sel.W.cols());
  for (Eigen::Index j = 0; j < sel.W.cols(); ++j) {
    const Eigen::ArrayXd col = a * sel.W.col(j).array();
    const Eigen::ArrayXd e = (col - col.maxCoeff()).exp();
    y.col(j) = e / e.sum();
  }
  return y;
}

/// Differentiable selection on the tape: V-hat = V * column_softmax(alpha_r * W).
/// v must have K columns matching w's K rows.
inline NodeId soft_select(Tape& t, NodeId v, NodeId w, int epoch, double beta) {
  const Matrix& V = t.value(v);
  const Matrix& W = t.value(w);
  if (W.cols() > W.rows()) {
    throw std::invalid_argument("soft_select: M=" + std::to_string(W.cols()) +
                                " exceeds K=" + std::to_string(W.rows()));
  }
  if (V.cols() != W.rows()) {
    throw std::invalid_argument("soft_select: V has " + std::to_string(V.cols()) +
                                " columns but W expects K=" + std::to_string(W.rows()));
  }
  return t.matmul(v, t.softmax_columns(w, anneal_alpha(epoch, beta)));
}

struct DuplicateSelection {
  int column_a = 0;
  int column_b = 0;
  int bin = 0;
};

struct HardenResult {
  std::vector<int> bin_indices;                // argmax per column, in column order
  std::vector<DuplicateSelection> duplicates;  // columns that collided
};

/// Collapses each column of W to its argmax row (ties break to the lowest
/// index). Columns landing on the same row are reported, not rejected: the
/// evaluator de-duplicates and simply scores fewer effective lights.
inline HardenResult harden(const SelectionMatrix& sel) {
  HardenResult out;
  out.bin_indices.reserve(static_cast<std::size_t>(sel.m()));
  for (int j = 0; j < sel.m(); ++j) {
    int best = 0;
    for (int i = 1; i < sel.k(); ++i) {
      if (sel.W(i, j) > sel.W(best, j)) best = i;
    }
    for (int jj = 0; jj < j; ++jj) {
      if (out.bin_indices[jj] == best) {
        out.duplicates.push_back({jj, j, best});
      }
    }
    out.bin_indices.push_back(best);
  }
  return out;
}

/// Learned lighting configuration, serialized as JSON.
struct LearnedConfig {
  LightBinGrid grid;
  int m = 0;
  double beta = 10.0;
  std::vector<int> bin_indices;
};

inline void save_config(const std::string& path, const LearnedConfig& cfg) {
  nlohmann::ordered_json j;
  j["K"] = cfg.grid.bin_count();
  j["M"] = cfg.m;
  j["beta"] = cfg.beta;
  j["bin_indices"] = cfg.bin_indices;
  j["grid"] = {{"n_azimuth", cfg.grid.n_azimuth}, {"n_elevation", cfg.grid.n_elevation}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline LearnedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_config: " + path + ": " + e.what());
  }
  LearnedConfig cfg;
  cfg.grid = make_grid(j.at("grid").at("n_azimuth").get<int>(),
                       j.at("grid").at("n_elevation").get<int>());
  cfg.m = j.at("M").get<int>();
  cfg.beta = j.value("beta", 10.0);
  cfg.bin_indices = j.at("bin_indices").get<std::vector<int>>();
  if (j.at("K").get<int>() != cfg.grid.bin_count()) {
    throw std::runtime_error("load_config: " + path + ": K does not match grid size");
  }
  for (int b : cfg.bin_indices) {
    if (b < 0 || b >= cfg.grid.bin_count()) {
      throw std::out_of_range("load_config: " + path + ": bin index " + std::to_string(b) +
                              " out of range for K=" + std::to_string(cfg.grid.bin_count()));
    }
  }
  return cfg;
}

}  // namespace lightplan
