#pragma once

// Scalar special functions shared by every module.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace advest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kLogHalf = -0.69314718055994530941723212145818;

/// Standard logistic CDF, stable for large |t|.
inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + e^{-t}); equals -log Λ(t).
inline double softplus_neg(double t) {
  if (t > 0.0) return std::log1p(std::exp(-t));
  return -t + std::log1p(std::exp(t));
}

inline double log_logistic(double t) { return -softplus_neg(t); }
inline double log1m_logistic(double t) { return -softplus_neg(-t); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x - 0.5 * kLog2Pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Mills ratio (1-Φ(t))/φ(t) for t ≥ 8 by its continued fraction.
inline double mills_ratio_tail(double t) {
  double frac = t;
  for (int k = 60; k >= 1; --k) frac = t + k / frac;
  return 1.0 / frac;
}

/// log Φ(x). Below -8 the continued-fraction tail keeps full relative precision.
inline double log_normal_cdf(double x) {
  if (x < -8.0) {
    return -0.5 * x * x - 0.5 * kLog2Pi + std::log(mills_ratio_tail(-x));
  }
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  return std::log(normal_cdf(x));
}

/// φ(x)/Φ(x), stable in the left tail.
inline double normal_hazard_lower(double x) {
  if (x < -8.0) return 1.0 / mills_ratio_tail(-x);
  return normal_pdf(x) / normal_cdf(x);
}

/// Gauss–Hermite rule for weight e^{-t²}: nodes and weights via Golub–Welsch.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussHermiteRule compute_gauss_hermite(int count) {
  if (count < 1) throw std::invalid_argument("gauss_hermite: node count must be >= 1");
  Mat jacobi = Mat::Zero(count, count);
  for (int i = 1; i < count; ++i) {
    const double off = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = off;
    jacobi(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  const double mass = std::sqrt(std::numbers::pi);
  for (int i = 0; i < count; ++i) {
    rule.nodes[i] = solver.eigenvalues()(i);
    const double v = solver.eigenvectors()(0, i);
    rule.weights[i] = mass * v * v;
  }
  return rule;
}

/// Cached rule; rules are immutable once built.
inline const GaussHermiteRule& gauss_hermite(int count) {
  static std::mutex mu;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(count);
  if (it == cache.end()) it = cache.emplace(count, compute_gauss_hermite(count)).first;
  return it->second;
}

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample standard deviation with divisor (k-1).
inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace advest
