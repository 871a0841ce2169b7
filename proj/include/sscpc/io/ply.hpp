// sscpc - PLY cloud interchange.
//
// PLY 1.0, ascii and binary_little_endian. One `vertex` element with float
// x,y,z and an optional uchar `label` property. Coordinates are float32 on
// disk and widen to double in memory. ASCII floats are written with
// shortest round-trip formatting, so write -> read -> write is
// byte-identical for both encodings.

#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/core/types.hpp"

namespace sscpc {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

enum class PlyEncoding { ascii, binary_little_endian };

namespace detail {

inline std::runtime_error ply_error(const std::filesystem::path& path, const std::string& what,
                                    std::uint64_t byte_offset) {
  return std::runtime_error("ply: " + path.string() + ": " + what + " (byte offset " +
                            std::to_string(byte_offset) + ")");
}

inline std::string float_to_string(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline void write_ply(const LabeledCloud& cloud, const std::filesystem::path& path,
                      PlyEncoding encoding = PlyEncoding::binary_little_endian) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ply: cannot open for writing: " + path.string());

  const bool labeled = cloud.has_labels();
  out << "ply\n";
  out << (encoding == PlyEncoding::ascii ? "format ascii 1.0\n"
                                         : "format binary_little_endian 1.0\n");
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (labeled) out << "property uchar label\n";
  out << "end_header\n";

  if (encoding == PlyEncoding::ascii) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Point3& p = cloud.points[i];
      out << detail::float_to_string(static_cast<float>(p.x())) << ' '
          << detail::float_to_string(static_cast<float>(p.y())) << ' '
          << detail::float_to_string(static_cast<float>(p.z()));
      if (labeled) out << ' ' << static_cast<unsigned>((*cloud.labels)[i]);
      out << '\n';
    }
  } else {
    std::vector<char> row(labeled ? 13 : 12);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const float xyz[3] = {static_cast<float>(cloud.points[i].x()),
                            static_cast<float>(cloud.points[i].y()),
                            static_cast<float>(cloud.points[i].z())};
      std::memcpy(row.data(), xyz, 12);
      if (labeled) row[12] = static_cast<char>((*cloud.labels)[i]);
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  }
  if (!out) throw std::runtime_error("ply: write failed: " + path.string());
}

inline LabeledCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ply: cannot open: " + path.string());

  // --- header ---
  std::uint64_t offset = 0;
  auto next_line = [&](std::string& line) {
    if (!std::getline(in, line)) throw detail::ply_error(path, "unexpected end of header", offset);
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  std::string line;
  next_line(line);
  if (line != "ply") throw detail::ply_error(path, "missing 'ply' magic", 0);

  PlyEncoding encoding = PlyEncoding::ascii;
  bool have_format = false;
  std::uint64_t vertex_count = 0;
  bool have_vertex = false;
  bool in_vertex_element = false;
  std::vector<std::string> properties;  // property names of the vertex element, in order

  while (true) {
    next_line(line);
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") encoding = PlyEncoding::ascii;
      else if (fmt == "binary_little_endian") encoding = PlyEncoding::binary_little_endian;
      else throw detail::ply_error(path, "unsupported format '" + fmt + "'", offset);
      if (version != "1.0") throw detail::ply_error(path, "unsupported version '" + version + "'", offset);
      have_format = true;
    } else if (tok == "element") {
      std::string name;
      std::uint64_t count = 0;
      ls >> name >> count;
      if (name != "vertex") throw detail::ply_error(path, "unsupported element '" + name + "'", offset);
      if (have_vertex) throw detail::ply_error(path, "duplicate vertex element", offset);
      vertex_count = count;
      have_vertex = true;
      in_vertex_element = true;
    } else if (tok == "property") {
      if (!in_vertex_element) throw detail::ply_error(path, "property outside vertex element", offset);
      std::string type, name;
      ls >> type >> name;
      if (name == "x" || name == "y" || name == "z") {
        if (type != "float" && type != "float32") {
          throw detail::ply_error(path, "property '" + name + "' must be float, got '" + type + "'", offset);
        }
      } else if (name == "label") {
        if (type != "uchar" && type != "uint8") {
          throw detail::ply_error(path, "property 'label' must be uchar, got '" + type + "'", offset);
        }
      } else {
        throw detail::ply_error(path, "unsupported property '" + name + "'", offset);
      }
      properties.push_back(name);
    } else if (tok == "end_header") {
      break;
    } else {
      throw detail::ply_error(path, "unknown header token '" + tok + "'", offset);
    }
  }
  if (!have_format) throw detail::ply_error(path, "missing format line", offset);
  if (!have_vertex) throw detail::ply_error(path, "missing vertex element", offset);
  const bool labeled = !properties.empty() && properties.back() == "label";
  const std::vector<std::string> expected =
      labeled ? std::vector<std::string>{"x", "y", "z", "label"}
              : std::vector<std::string>{"x", "y", "z"};
  if (properties != expected) {
    throw detail::ply_error(path, "vertex properties must be x,y,z[,label] in order", offset);
  }

  // --- payload ---
  LabeledCloud cloud;
  cloud.points.reserve(vertex_count);
  if (labeled) cloud.labels.emplace();

  if (encoding == PlyEncoding::ascii) {
    for (std::uint64_t i = 0; i < vertex_count; ++i) {
      if (!std::getline(in, line)) {
        throw detail::ply_error(path, "truncated: expected " + std::to_string(vertex_count) +
                                          " got " + std::to_string(i), offset);
      }
      offset += line.size() + 1;
      std::istringstream ls(line);
      float x, y, z;
      if (!(ls >> x >> y >> z)) {
        throw detail::ply_error(path, "malformed vertex row " + std::to_string(i), offset);
      }
      cloud.points.emplace_back(x, y, z);
      if (labeled) {
        unsigned label;
        if (!(ls >> label)) throw detail::ply_error(path, "missing label in row " + std::to_string(i), offset);
        if (!is_valid_class_id(label)) {
          throw detail::ply_error(path, "invalid label " + std::to_string(label) + " in row " + std::to_string(i), offset);
        }
        cloud.labels->push_back(static_cast<SemanticClass>(label));
      }
    }
  } else {
    const std::size_t stride = labeled ? 13 : 12;
    std::vector<char> row(stride);
    for (std::uint64_t i = 0; i < vertex_count; ++i) {
      if (!in.read(row.data(), static_cast<std::streamsize>(stride))) {
        throw detail::ply_error(path, "truncated: expected " + std::to_string(vertex_count) +
                                          " got " + std::to_string(i), offset);
      }
      offset += stride;
      float xyz[3];
      std::memcpy(xyz, row.data(), 12);
      cloud.points.emplace_back(xyz[0], xyz[1], xyz[2]);
      if (labeled) {
        const unsigned label = static_cast<unsigned char>(row[12]);
        if (!is_valid_class_id(label)) {
          throw detail::ply_error(path, "invalid label " + std::to_string(label) + " in row " + std::to_string(i), offset);
        }
        cloud.labels->push_back(static_cast<SemanticClass>(label));
      }
    }
  }
  return cloud;
}

}  // namespace sscpc
