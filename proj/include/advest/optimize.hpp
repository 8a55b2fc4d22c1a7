#pragma once

// Derivative-free minimization over the unconstrained internal coordinates of
// a ParamVector.

#include "advest/math.hpp"
#include "advest/params.hpp"
#include "advest/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace advest {

/// Natural-scale scan of one coordinate: `points` values from lower to upper.
struct GridAxis {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  int points = 21;

  friend bool operator==(const GridAxis&, const GridAxis&) = default;

  [[nodiscard]] std::vector<double> values() const {
    if (points < 2 || !(upper > lower)) throw std::invalid_argument("GridAxis " + name + ": need points >= 2 and upper > lower");
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) v[static_cast<std::size_t>(k)] = lower + (upper - lower) * k / (points - 1);
    return v;
  }
};

enum class OptMethod { nelder_mead, grid_then_nelder_mead };

inline std::string to_string(OptMethod m) { return m == OptMethod::nelder_mead ? "nelder_mead" : "grid_then_nelder_mead"; }

inline OptMethod opt_method_from_string(const std::string& s) {
  if (s == "nelder_mead") return OptMethod::nelder_mead;
  if (s == "grid_then_nelder_mead") return OptMethod::grid_then_nelder_mead;
  throw std::invalid_argument("unknown optimizer method: " + s);
}

struct OptimizerConfig {
  OptMethod method = OptMethod::nelder_mead;
  /// Initial simplex edge in internal coordinates.
  double simplex_scale = 0.1;
  double ftol = 1e-8;
  double xtol = 1e-6;
  int max_evals = 4000;
  std::vector<GridAxis> grid;
  /// Total number of starts; starts after the first are jittered.
  int starts = 1;
  double jitter = 0.1;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct TracePoint {
  Vec theta;  // natural scale, free coordinates
  double value = 0.0;
};

struct OptimResult {
  ParamVector best;
  double value = kInf;
  int evaluations = 0;
  bool converged = false;
  bool improved_on_seed = false;
  double seed_value = kInf;
  std::vector<TracePoint> trace;
};

using Criterion = std::function<double(const ParamVector&)>;

namespace detail {

/// Criterion in internal coordinates; out-of-bounds and NaN map to +inf.
struct InternalCriterion {
  const ParamVector& tmpl;
  const Criterion& f;
  OptimResult& result;

  double operator()(const Vec& z) {
    ParamVector th = tmpl.from_internal(z);
    double v = kInf;
    if (th.in_bounds()) {
      v = f(th);
      if (std::isnan(v)) v = kInf;
    }
    ++result.evaluations;
    result.trace.push_back({th.values(), v});
    if (v < result.value) {
      result.value = v;
      result.best = th;
    }
    return v;
  }
};

/// Nelder–Mead with coefficients (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
inline bool nelder_mead(InternalCriterion& f, const Vec& x0, double scale, double ftol, double xtol, int max_evals) {
  const Eigen::Index k = x0.size();
  std::vector<Vec> x(static_cast<std::size_t>(k + 1), x0);
  std::vector<double> fx(static_cast<std::size_t>(k + 1));
  fx[0] = f(x0);
  for (Eigen::Index j = 0; j < k; ++j) {
    x[static_cast<std::size_t>(j + 1)](j) += scale;
    fx[static_cast<std::size_t>(j + 1)] = f(x[static_cast<std::size_t>(j + 1)]);
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(k + 1));
  const int budget_start = f.result.evaluations;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    std::vector<Vec> xs;
    std::vector<double> fs;
    for (auto i : order) {
      xs.push_back(x[i]);
      fs.push_back(fx[i]);
    }
    x = std::move(xs);
    fx = std::move(fs);

    double fspread = 0.0, xspread = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      fspread = std::max(fspread, std::isfinite(fx[i]) ? std::abs(fx[i] - fx[0]) : kInf);
      xspread = std::max(xspread, (x[i] - x[0]).lpNorm<Eigen::Infinity>());
    }
    if (std::isfinite(fx[0]) && fspread <= ftol && xspread <= xtol) return true;
    if (f.result.evaluations - budget_start >= max_evals) return false;

    const std::size_t worst = x.size() - 1;
    Vec centroid = Vec::Zero(k);
    for (std::size_t i = 0; i < worst; ++i) centroid += x[i];
    centroid /= static_cast<double>(k);

    const Vec xr = centroid + (centroid - x[worst]);
    const double fr = f(xr);
    if (fr < fx[0]) {
      const Vec xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[worst - 1]) {
      x[worst] = xr;
      fx[worst] = fr;
      continue;
    }
    // Outside contraction when the reflection beats the worst vertex, inside otherwise.
    const bool outside = fr < fx[worst];
    const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (x[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : fx[worst])) {
      x[worst] = xc;
      fx[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i < x.size(); ++i) {
      x[i] = x[0] + 0.5 * (x[i] - x[0]);
      fx[i] = f(x[i]);
    }
  }
}

}  // namespace detail

/// Minimizes f starting from `start`. With a grid, each listed coordinate is
/// scanned in turn (others held at the incumbent) and the best node seeds the
/// simplex. Extra starts add N(0, jitter²) noise in internal coordinates.
inline OptimResult minimize(const Criterion& f, const ParamVector& start, const OptimizerConfig& cfg,
                            const RngStream& rng = RngStream(0)) {
  start.require_in_bounds();
  if (cfg.starts < 1) throw std::invalid_argument("minimize: starts must be >= 1");
  OptimResult result;
  result.best = start;
  detail::InternalCriterion crit{start, f, result};

  ParamVector seed = start;
  if (cfg.method == OptMethod::grid_then_nelder_mead) {
    for (const auto& axis : cfg.grid) {
      const int idx = seed.index_of(axis.name);
      if (idx < 0) throw std::invalid_argument("minimize: grid coordinate not free: " + axis.name);
      double best_v = kInf;
      double best_x = seed[static_cast<std::size_t>(idx)];
      for (double v : axis.values()) {
        ParamVector trial;
        try {
          trial = seed.with(axis.name, v);
        } catch (const std::exception&) {
          continue;
        }
        if (!trial.in_bounds()) continue;
        const double fv = crit(trial.to_internal());
        if (fv < best_v) {
          best_v = fv;
          best_x = v;
        }
      }
      seed = seed.with(axis.name, best_x);
    }
  }
  const Vec z0 = seed.to_internal();
  result.seed_value = crit(z0);

  RngStream jitter_rng = rng.child("multistart");
  bool any_converged = false;
  for (int s = 0; s < cfg.starts; ++s) {
    Vec z = z0;
    if (s > 0) {
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += cfg.jitter * jitter_rng.normal();
      if (!start.from_internal(z).in_bounds()) z = z0;
    }
    any_converged |= detail::nelder_mead(crit, z, cfg.simplex_scale, cfg.ftol, cfg.xtol, cfg.max_evals);
  }
  if (!std::isfinite(result.value)) throw std::runtime_error("minimize: every evaluated point has a non-finite criterion");
  result.converged = any_converged;
  result.improved_on_seed = result.value < result.seed_value;
  return result;
}

}  // namespace advest
