// sscpc - metrics report JSON.
//
// Values are kept at full precision in memory and rounded to two decimals
// only here, at the serialization boundary. Absent classes serialize as
// null so a report always lists all 16 class columns.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sscpc/metrics/metrics.hpp"

namespace sscpc {

namespace detail {
inline double round2(double v) { return std::round(v * 100.0) / 100.0; }
}  // namespace detail

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["schema"] = 1;
  j["cd_l1"] = detail::round2(r.cd_l1);
  j["cd_l2"] = detail::round2(r.cd_l2);
  j["f1"] = detail::round2(r.f1);
  j["threshold"] = r.threshold;
  j["miou"] = detail::round2(r.miou);
  j["n_pred"] = r.n_pred;
  j["n_gt"] = r.n_gt;
  auto& per_class = j["per_class_iou"] = nlohmann::json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    const auto name = std::string(kClassNames[k]);
    if (r.per_class_iou[k]) per_class[name] = detail::round2(*r.per_class_iou[k]);
    else per_class[name] = nullptr;
  }
  return j;
}

inline void write_report(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot open for writing: " + path.string());
  out << report_to_json(r).dump(2) << "\n";
  if (!out) throw std::runtime_error("report: write failed: " + path.string());
}

inline MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report: cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("report: " + path.string() + ": " + e.what());
  }
  if (!j.contains("schema") || j["schema"].get<int>() != 1) {
    throw std::runtime_error("report: " + path.string() + ": unsupported schema");
  }
  MetricsReport r;
  r.cd_l1 = j.at("cd_l1").get<double>();
  r.cd_l2 = j.at("cd_l2").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.miou = j.at("miou").get<double>();
  r.n_pred = j.at("n_pred").get<std::uint64_t>();
  r.n_gt = j.at("n_gt").get<std::uint64_t>();
  const auto& per_class = j.at("per_class_iou");
  for (int k = 0; k < kNumClasses; ++k) {
    const auto it = per_class.find(std::string(kClassNames[k]));
    if (it != per_class.end() && !it->is_null()) r.per_class_iou[k] = it->get<double>();
  }
  return r;
}

}  // namespace sscpc
