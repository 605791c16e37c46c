#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightplan/geometry.hpp"

namespace lightplan {

/// Dense H x W x C array, row-major, channel-interleaved, double storage.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c),
                               data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

/// Per-pixel unit normals stored as a 3-channel image.
using NormalMap = Image;

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count_on() const {
    std::size_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
  }
};

namespace detail {

inline std::string next_pnm_token(std::istream& in) {
  std::string tok;
  int ch = in.get();
  while (ch == '#' || std::isspace(ch)) {
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
    }
    ch = in.get();
  }
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  if (tok.empty()) throw std::runtime_error("truncated PNM/PFM header");
  return tok;
}

}  // namespace detail

/// PFM writer. 1 channel -> "Pf", 3 channels -> "PF"; scale -1.0 marks
/// little-endian payload; rows stored bottom-to-top per the format.
inline void write_pfm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw std::invalid_argument("write_pfm: " + path + ": channels must be 1 or 3");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n" << "-1.0" << "\n";
  std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        row[static_cast<std::size_t>(x) * img.channels + c] =
            static_cast<float>(img.at(y, x, c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write_pfm: short write to " + path);
}

inline Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
  const std::string magic = detail::next_pnm_token(in);
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw std::runtime_error("read_pfm: " + path + ": bad magic '" + magic + "'");
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(detail::next_pnm_token(in));
    height = std::stoi(detail::next_pnm_token(in));
    scale = std::stod(detail::next_pnm_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("read_pfm: " + path + ": malformed header");
  }
  if (width <= 0 || height <= 0 || scale == 0.0) {
    throw std::runtime_error("read_pfm: " + path + ": malformed header dimensions/scale");
  }
  if (scale > 0.0) {
    throw std::runtime_error("read_pfm: " + path + ": big-endian PFM not supported");
  }
  Image img(height, width, channels);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw std::runtime_error("read_pfm: " + path + ": truncated payload");
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        img.at(y, x, c) = row[static_cast<std::size_t>(x) * channels + c];
      }
    }
  }
  return img;
}

/// Binary PGM (P5, maxval 255); nonzero bytes are "on".
inline void write_pgm(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width));
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
    out.write(reinterpret_cast<const char*>(row.data()), mask.width);
  }
  if (!out) throw std::runtime_error("write_pgm: short write to " + path);
}

inline Mask read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path);
  const std::string magic = detail::next_pnm_token(in);
  if (magic != "P5") throw std::runtime_error("read_pgm: " + path + ": bad magic '" + magic + "'");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(detail::next_pnm_token(in));
    height = std::stoi(detail::next_pnm_token(in));
    maxval = std::stoi(detail::next_pnm_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("read_pgm: " + path + ": malformed header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw std::runtime_error("read_pgm: " + path + ": malformed header");
  }
  Mask mask(height, width);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), width);
    if (!in) throw std::runtime_error("read_pgm: " + path + ": truncated payload");
    for (int x = 0; x < width; ++x) mask.at(y, x) = row[x] ? 1 : 0;
  }
  return mask;
}

/// Lights text format: one "lx ly lz" unit vector per line.
inline void write_lights(const std::string& path, const std::vector<UnitVector3>& lights) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_lights: cannot open " + path);
  out.precision(17);
  for (const auto& l : lights) out << l.x << " " << l.y << " " << l.z << "\n";
  if (!out) throw std::runtime_error("write_lights: short write to " + path);
}

inline std::vector<UnitVector3> read_lights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_lights: cannot open " + path);
  std::vector<UnitVector3> lights;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) {
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      throw std::runtime_error("read_lights: " + path + ": bad line " + std::to_string(line_no));
    }
    lights.push_back(normalized(x, y, z));
  }
  return lights;
}

}  // namespace lightplan
