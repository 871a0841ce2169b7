// sscpc - finite-difference gradient certification.
//
// Compares analytic parameter gradients of a scalar probe against central
// finite differences (step 1e-5) on a random subsample of at least 200
// parameter coordinates. Probes are either a fixed random weighting of the
// kernel outputs or the training loss itself.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sscpc/core/rng.hpp"
#include "sscpc/model/layers.hpp"

namespace sscpc {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t coords_checked = 0;
};

/// A differentiable scalar under test: evaluate() runs a fresh forward and
/// returns the probe value; gradients() must expose accumulated analytic
/// gradients after one forward+backward (done by the caller before check).
struct GradCheckTarget {
  std::function<double()> evaluate;
  std::function<void(const ParamVisitor&)> visit_params;
};

inline GradCheckReport gradcheck(const GradCheckTarget& target, std::uint64_t seed,
                                 std::size_t min_coords = 200, double step = 1e-5) {
  // Collect parameter references and analytic gradients.
  struct Entry {
    std::string name;
    Param* param;
  };
  std::vector<Entry> entries;
  target.visit_params([&](const std::string& name, Param& p) { entries.push_back({name, &p}); });

  std::size_t total_coords = 0;
  for (const auto& e : entries) total_coords += static_cast<std::size_t>(e.param->value.size());
  const std::size_t want = std::min(std::max(min_coords, std::size_t{1}), total_coords);

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t probe = 0; probe < want; ++probe) {
    // Uniform coordinate over the concatenated parameter vector.
    std::size_t flat = rng.index(total_coords);
    std::size_t which = 0;
    while (flat >= static_cast<std::size_t>(entries[which].param->value.size())) {
      flat -= static_cast<std::size_t>(entries[which].param->value.size());
      ++which;
    }
    Param& p = *entries[which].param;
    const Eigen::Index r = static_cast<Eigen::Index>(flat) % p.value.rows();
    const Eigen::Index c = static_cast<Eigen::Index>(flat) / p.value.rows();

    const double analytic = p.grad(r, c);
    const double saved = p.value(r, c);
    p.value(r, c) = saved + step;
    const double f_plus = target.evaluate();
    p.value(r, c) = saved - step;
    const double f_minus = target.evaluate();
    p.value(r, c) = saved;

    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double rel = std::abs(fd - analytic) / std::max(std::abs(fd) + std::abs(analytic), 1e-4);
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = entries[which].name;
    }
    ++report.coords_checked;
  }
  return report;
}

}  // namespace sscpc
