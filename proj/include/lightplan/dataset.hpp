#pragma once

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightplan/image.hpp"
#include "lightplan/lightspace.hpp"
#include "lightplan/render.hpp"

namespace lightplan {

/// A rendered sample whose lights have been assigned to grid bins.
/// bin_to_light[bin] is the index into sample.images / sample.lights, or
/// kUnassigned when no light fell into that bin.
struct BinnedScene {
  RenderedSample sample;
  LightBinGrid grid;
  std::vector<int> bin_to_light;

  std::vector<int> covered_bins() const {
    std::vector<int> bins;
    for (int b = 0; b < static_cast<int>(bin_to_light.size()); ++b) {
      if (bin_to_light[b] != kUnassigned) bins.push_back(b);
    }
    return bins;
  }
};

inline BinnedScene bin_scene(RenderedSample sample, const LightBinGrid& grid) {
  BinnedScene out;
  out.grid = grid;
  const BinAssignment a = assign_lights(grid, sample.lights, true);
  out.bin_to_light = a.pairs;
  out.sample = std::move(sample);
  return out;
}

/// Dataset directory layout: images/NNN.pfm, lights.txt, normals_gt.pfm,
/// mask.pgm.
inline void save_dataset(const std::string& dir, const RenderedSample& sample) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  char name[16];
  for (std::size_t i = 0; i < sample.images.size(); ++i) {
    std::snprintf(name, sizeof(name), "%03zu.pfm", i);
    write_pfm((fs::path(dir) / "images" / name).string(), sample.images[i]);
  }
  write_lights((fs::path(dir) / "lights.txt").string(), sample.lights);
  write_pfm((fs::path(dir) / "normals_gt.pfm").string(), sample.normals_gt);
  write_pgm((fs::path(dir) / "mask.pgm").string(), sample.mask);
}

inline RenderedSample load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::exists(root / "mask.pgm")) {
    throw std::runtime_error("load_dataset: missing " + (root / "mask.pgm").string());
  }
  if (!fs::exists(root / "lights.txt")) {
    throw std::runtime_error("load_dataset: missing " + (root / "lights.txt").string());
  }
  RenderedSample sample;
  sample.lights = read_lights((root / "lights.txt").string());
  sample.normals_gt = read_pfm((root / "normals_gt.pfm").string());
  sample.mask = read_pgm((root / "mask.pgm").string());
  char name[16];
  for (std::size_t i = 0;; ++i) {
    std::snprintf(name, sizeof(name), "%03zu.pfm", i);
    const fs::path p = root / "images" / name;
    if (!fs::exists(p)) break;
    sample.images.push_back(read_pfm(p.string()));
  }
  if (sample.images.size() != sample.lights.size()) {
    throw std::runtime_error("load_dataset: " + dir + ": " +
                             std::to_string(sample.images.size()) + " images but " +
                             std::to_string(sample.lights.size()) + " lights");
  }
  if (sample.images.empty()) {
    throw std::runtime_error("load_dataset: " + dir + ": no images found");
  }
  return sample;
}

}  // namespace lightplan
