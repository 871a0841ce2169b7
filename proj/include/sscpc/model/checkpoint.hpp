// sscpc - versioned binary checkpoint: named parameter tensors with shape
// headers.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "sscpc/model/network.hpp"

namespace sscpc {

namespace detail {
inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'C', 'P', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("checkpoint: truncated while reading " + what);
  }
  return v;
}
}  // namespace detail

inline void save_checkpoint(SscModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
  out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::write_pod<std::uint32_t>(out, 1);  // version

  std::uint32_t count = 0;
  model.visit([&](const std::string&, Param&) { ++count; });
  detail::write_pod(out, count);

  model.visit([&](const std::string& name, Param& p) {
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        detail::write_pod<double>(out, p.value(r, c));
      }
    }
  });
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

inline void load_checkpoint(SscModel& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic: " + path.string());
  }
  const auto version = detail::read_pod<std::uint32_t>(in, "version");
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  const auto count = detail::read_pod<std::uint32_t>(in, "tensor count");

  std::map<std::string, Mat> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated name");
    const auto rows = detail::read_pod<std::uint64_t>(in, "rows");
    const auto cols = detail::read_pod<std::uint64_t>(in, "cols");
    Mat m(rows, cols);
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            detail::read_pod<double>(in, "tensor data");
      }
    }
    tensors.emplace(std::move(name), std::move(m));
  }

  model.visit([&](const std::string& name, Param& p) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    }
    p.value = it->second;
    tensors.erase(it);
  });
  if (!tensors.empty()) {
    throw std::runtime_error("checkpoint: unknown tensor '" + tensors.begin()->first + "'");
  }
}

}  // namespace sscpc
