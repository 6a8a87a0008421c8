#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rgt/nn/tensor.hpp"
#include "rgt/random.hpp"

namespace rgt::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Entries whose analytic and numeric gradients are both below this
  // magnitude are compared absolutely rather than relatively.
  double abs_floor = 1e-8;
  // Maximum entries checked per parameter tensor (0 = all), sampled with rng.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 1;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  // |a - n| / max(|a|, |n|) over the vector of all checked entries.
  double norm_rel_error = 0.0;
};

// Compares analytic parameter gradients with central differences
// (f(θ+h) - f(θ-h)) / 2h. `backprop()` must zero, then fill, the gradient
// accumulators of `params`; `loss()` evaluates the scalar loss without
// touching gradients.
template <class T, class BackpropFn, class LossFn>
GradCheckReport grad_check(const ParamList<T>& params, BackpropFn&& backprop, LossFn&& loss,
                           const GradCheckOptions& options = {}) {
  backprop();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad, p.grad + p.size());

  Rng rng = make_rng(options.seed);
  GradCheckReport report;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    std::vector<Index> entries(static_cast<std::size_t>(p.size()));
    for (Index i = 0; i < p.size(); ++i) entries[static_cast<std::size_t>(i)] = i;
    if (options.max_entries_per_param > 0 && entries.size() > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
    }
    for (Index i : entries) {
      const T saved = p.value[i];
      p.value[i] = static_cast<T>(saved + options.step);
      const double up = static_cast<double>(loss());
      p.value[i] = static_cast<T>(saved - options.step);
      const double down = static_cast<double>(loss());
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][static_cast<std::size_t>(i)];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  const double scale = std::sqrt(std::max(a2, n2));
  report.norm_rel_error = scale > 0 ? std::sqrt(diff2) / scale : 0.0;
  return report;
}

}  // namespace rgt::nn
