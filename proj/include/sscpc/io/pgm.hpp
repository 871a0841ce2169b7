// sscpc - segmentation masks as binary PGM (P5, maxval 255).
//
// Pixel value = semantic class id; 255 = unlabeled. No image library
// needed.

#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/core/types.hpp"

namespace sscpc {

struct SegmentationMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, height*width

  std::uint8_t at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
  std::uint8_t& at(int u, int v) {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }

  void validate() const {
    if (width <= 0 || height <= 0) throw std::runtime_error("mask: non-positive dimensions");
    if (pixels.size() != static_cast<std::size_t>(width) * height) {
      throw std::runtime_error("mask: pixel buffer size mismatch");
    }
    for (std::uint8_t p : pixels) {
      if (!is_valid_class_id(p)) {
        throw std::runtime_error("mask: invalid class id " + std::to_string(p));
      }
    }
  }

  static SegmentationMask filled(int width, int height,
                                 SemanticClass value = SemanticClass::unlabeled) {
    SegmentationMask m;
    m.width = width;
    m.height = height;
    m.pixels.assign(static_cast<std::size_t>(width) * height,
                    static_cast<std::uint8_t>(value));
    return m;
  }
};

namespace detail {
// PGM headers allow '#' comments and arbitrary whitespace between tokens.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}
}  // namespace detail

inline void write_mask(const SegmentationMask& mask, const std::filesystem::path& path) {
  mask.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot open for writing: " + path.string());
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.pixels.data()),
            static_cast<std::streamsize>(mask.pixels.size()));
  if (!out) throw std::runtime_error("pgm: write failed: " + path.string());
}

inline SegmentationMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open: " + path.string());
  if (detail::pgm_token(in) != "P5") throw std::runtime_error("pgm: " + path.string() + ": not a P5 file");
  SegmentationMask mask;
  try {
    mask.width = std::stoi(detail::pgm_token(in));
    mask.height = std::stoi(detail::pgm_token(in));
    const int maxval = std::stoi(detail::pgm_token(in));
    if (maxval != 255) throw std::runtime_error("pgm: " + path.string() + ": unsupported maxval " + std::to_string(maxval));
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("pgm: " + path.string() + ": malformed header");
  }
  if (mask.width <= 0 || mask.height <= 0) {
    throw std::runtime_error("pgm: " + path.string() + ": non-positive dimensions");
  }
  mask.pixels.resize(static_cast<std::size_t>(mask.width) * mask.height);
  if (!in.read(reinterpret_cast<char*>(mask.pixels.data()),
               static_cast<std::streamsize>(mask.pixels.size()))) {
    throw std::runtime_error("pgm: " + path.string() + ": truncated pixel data");
  }
  mask.validate();
  return mask;
}

}  // namespace sscpc
