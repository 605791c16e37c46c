#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lightplan/geometry.hpp"
#include "lightplan/image.hpp"
#include "lightplan/rng.hpp"
#include "lightplan/tensor.hpp"

namespace lightplan {

/// Per-pixel normal regressor: a shared 7-layer relu extractor applied to
/// each (rgb, light) input, element-wise max fusion across the M inputs, and
/// a 4-layer head whose 3 outputs are l2-normalized into a unit normal.
/// Every layer has receptive field 1, so pixels are independent rows.
struct NormalNetParams {
  static constexpr int kWidth = 64;
  static constexpr int kInputDim = 6;  // r, g, b, lx, ly, lz
  static constexpr int kExtractorLayers = 7;
  static constexpr int kHeadLayers = 4;

  std::vector<Matrix> extractor_w, extractor_b;  // w: in x out, b: 1 x out
  std::vector<Matrix> head_w, head_b;
};

inline NormalNetParams init_params(std::uint64_t seed) {
  NormalNetParams p;
  Rng rng(mix64(seed ^ 0x6e65745f696e6974ULL));
  auto glorot = [&rng](int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    }
    return w;
  };
  int in = NormalNetParams::kInputDim;
  for (int l = 0; l < NormalNetParams::kExtractorLayers; ++l) {
    p.extractor_w.push_back(glorot(in, NormalNetParams::kWidth));
    p.extractor_b.push_back(Matrix::Zero(1, NormalNetParams::kWidth));
    in = NormalNetParams::kWidth;
  }
  for (int l = 0; l < NormalNetParams::kHeadLayers; ++l) {
    const int out = (l == NormalNetParams::kHeadLayers - 1) ? 3 : NormalNetParams::kWidth;
    p.head_w.push_back(glorot(NormalNetParams::kWidth, out));
    p.head_b.push_back(Matrix::Zero(1, out));
  }
  return p;
}

/// Tape node ids for one registration of the parameters.
struct NetNodes {
  std::vector<NodeId> extractor_w, extractor_b, head_w, head_b;

  std::vector<NodeId> all() const {
    std::vector<NodeId> ids;
    for (auto v : {&extractor_w, &extractor_b, &head_w, &head_b}) {
      ids.insert(ids.end(), v->begin(), v->end());
    }
    return ids;
  }
};

inline NetNodes register_params(Tape& t, const NormalNetParams& p) {
  NetNodes n;
  for (const auto& w : p.extractor_w) n.extractor_w.push_back(t.input(w, true));
  for (const auto& b : p.extractor_b) n.extractor_b.push_back(t.input(b, true));
  for (const auto& w : p.head_w) n.head_w.push_back(t.input(w, true));
  for (const auto& b : p.head_b) n.head_b.push_back(t.input(b, true));
  return n;
}

/// Shared extractor on one input: x is q x 6, result q x 64.
inline NodeId extract_features(Tape& t, NodeId x, const NetNodes& net) {
  NodeId h = x;
  for (std::size_t l = 0; l < net.extractor_w.size(); ++l) {
    h = t.relu(t.add(t.matmul(h, net.extractor_w[l]), net.extractor_b[l]));
  }
  return h;
}

/// Full forward pass: per-input extraction, max fusion, regression head,
/// row normalization. inputs are q x 6 nodes; the result is q x 3 unit rows.
inline NodeId forward_normals(Tape& t, const std::vector<NodeId>& inputs,
                              const NetNodes& net) {
  if (inputs.empty()) throw std::invalid_argument("forward_normals: no inputs");
  std::vector<NodeId> feats;
  feats.reserve(inputs.size());
  for (NodeId x : inputs) feats.push_back(extract_features(t, x, net));
  NodeId h = t.elementwise_max(feats);
  for (std::size_t l = 0; l < net.head_w.size(); ++l) {
    h = t.add(t.matmul(h, net.head_w[l]), net.head_b[l]);
    if (l + 1 < net.head_w.size()) h = t.relu(h);
  }
  return t.l2_normalize_rows(h);
}

/// Mean squared normal error over rows: (1/q) * sum_p ||pred_p - target_p||^2.
/// For unit rows this equals (1/q) * sum_p 2(1 - pred_p . target_p).
inline NodeId normal_loss_node(Tape& t, NodeId pred, const Matrix& target) {
  const Eigen::Index rows = t.value(pred).rows();
  if (rows != target.rows() || t.value(pred).cols() != target.cols()) {
    detail::shape_error("normal_loss", t.value(pred), target);
  }
  if (rows == 0) throw std::invalid_argument("normal_loss: no pixels");
  NodeId diff = t.sub(pred, t.input(target));
  NodeId ss = t.masked_sum_of_squares(diff, Matrix::Ones(rows, 1));
  return t.scale(ss, 1.0 / static_cast<double>(rows));
}

/// Map-level loss between two normal maps restricted to the mask.
inline double normal_loss(const NormalMap& pred, const NormalMap& gt, const Mask& mask) {
  if (pred.height != gt.height || pred.width != gt.width ||
      mask.height != gt.height || mask.width != gt.width) {
    throw std::invalid_argument("normal_loss: map sizes disagree");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = pred.at(y, x, c) - gt.at(y, x, c);
        d2 += d * d;
      }
      sum += d2;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("normal_loss: empty mask");
  return sum / static_cast<double>(n);
}

inline std::vector<std::pair<int, int>> masked_pixels(const Mask& mask) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x)) out.emplace_back(y, x);
    }
  }
  return out;
}

/// Rows of (r,g,b,lx,ly,lz) for the listed pixels of one image-light pair.
inline Matrix gather_features(const Image& img, const UnitVector3& l,
                              const std::vector<std::pair<int, int>>& pixels) {
  Matrix f(static_cast<Eigen::Index>(pixels.size()), 6);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto [y, x] = pixels[i];
    f(static_cast<Eigen::Index>(i), 0) = img.at(y, x, 0);
    f(static_cast<Eigen::Index>(i), 1) = img.at(y, x, img.channels > 1 ? 1 : 0);
    f(static_cast<Eigen::Index>(i), 2) = img.at(y, x, img.channels > 2 ? 2 : 0);
    f(static_cast<Eigen::Index>(i), 3) = l.x;
    f(static_cast<Eigen::Index>(i), 4) = l.y;
    f(static_cast<Eigen::Index>(i), 5) = l.z;
  }
  return f;
}

inline Matrix gather_normals(const NormalMap& nm,
                             const std::vector<std::pair<int, int>>& pixels) {
  Matrix n(static_cast<Eigen::Index>(pixels.size()), 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto [y, x] = pixels[i];
    for (int c = 0; c < 3; ++c) n(static_cast<Eigen::Index>(i), c) = nm.at(y, x, c);
  }
  return n;
}

/// Runs the trained net over every masked pixel of a sample subset and
/// scatters the unit normals back into a map (off-mask pixels get (0,0,1)).
inline NormalMap predict_normals(const NormalNetParams& params,
                                 const std::vector<Image>& images,
                                 const std::vector<UnitVector3>& lights,
                                 const Mask& mask) {
  if (images.empty() || images.size() != lights.size()) {
    throw std::invalid_argument("predict_normals: need matching images and lights");
  }
  const auto pixels = masked_pixels(mask);
  if (pixels.empty()) throw std::invalid_argument("predict_normals: empty mask");
  Tape t;
  const NetNodes net = register_params(t, params);
  std::vector<NodeId> inputs;
  inputs.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    inputs.push_back(t.input(gather_features(images[i], lights[i], pixels)));
  }
  const NodeId pred = forward_normals(t, inputs, net);
  const Matrix& P = t.value(pred);
  NormalMap out(mask.height, mask.width, 3);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) out.at(y, x, 2) = 1.0;
  }
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto [y, x] = pixels[i];
    for (int c = 0; c < 3; ++c) out.at(y, x, c) = P(static_cast<Eigen::Index>(i), c);
  }
  return out;
}

/// Parameters persist as a raw little-endian float64 blob next to a JSON
/// manifest listing every matrix's shape in order.
inline void save_params(const std::string& base_path, const NormalNetParams& p) {
  nlohmann::ordered_json manifest;
  manifest["width"] = NormalNetParams::kWidth;
  manifest["input_dim"] = NormalNetParams::kInputDim;
  auto shapes = nlohmann::ordered_json::array();
  std::ofstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("save_params: cannot open " + base_path + ".bin");
  auto dump = [&](const char* group, const std::vector<Matrix>& ms) {
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const Matrix& m = ms[i];
      shapes.push_back({{"group", group},
                        {"index", i},
                        {"rows", m.rows()},
                        {"cols", m.cols()}});
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          const double v = m(r, c);
          bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
    }
  };
  dump("extractor_w", p.extractor_w);
  dump("extractor_b", p.extractor_b);
  dump("head_w", p.head_w);
  dump("head_b", p.head_b);
  if (!bin) throw std::runtime_error("save_params: short write to " + base_path + ".bin");
  manifest["tensors"] = shapes;
  std::ofstream js(base_path + ".json");
  if (!js) throw std::runtime_error("save_params: cannot open " + base_path + ".json");
  js << manifest.dump(2) << "\n";
}

inline NormalNetParams load_params(const std::string& base_path) {
  std::ifstream js(base_path + ".json");
  if (!js) throw std::runtime_error("load_params: cannot open " + base_path + ".json");
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_params: " + base_path + ".json: " + e.what());
  }
  std::ifstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("load_params: cannot open " + base_path + ".bin");
  NormalNetParams p;
  for (const auto& entry : manifest.at("tensors")) {
    const std::string group = entry.at("group").get<std::string>();
    Matrix m(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double v;
        bin.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!bin) throw std::runtime_error("load_params: " + base_path + ".bin truncated");
        m(r, c) = v;
      }
    }
    if (group == "extractor_w") p.extractor_w.push_back(std::move(m));
    else if (group == "extractor_b") p.extractor_b.push_back(std::move(m));
    else if (group == "head_w") p.head_w.push_back(std::move(m));
    else if (group == "head_b") p.head_b.push_back(std::move(m));
    else throw std::runtime_error("load_params: unknown tensor group '" + group + "'");
  }
  return p;
}

}  // namespace lightplan
