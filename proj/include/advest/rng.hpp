#pragma once

// Counter-based, splittable random streams. Every draw is a pure function of
// (key, counter), so child streams can be derived by label in any order.

#include "advest/dataset.hpp"
#include "advest/math.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace advest {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Snapshot of a stream position.
struct RngState {
  std::string algorithm = "splitmix64-ctr";
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(seed) {}
  explicit RngStream(const RngState& state) : key_(state.seed), counter_(state.counter) {
    if (state.algorithm != "splitmix64-ctr") {
      throw std::invalid_argument("RngStream: unknown algorithm " + state.algorithm);
    }
  }

  [[nodiscard]] RngState state() const { return {"splitmix64-ctr", key_, counter_}; }

  /// Independent stream keyed by (this key, label); ignores the current counter.
  [[nodiscard]] RngStream child(std::string_view label) const {
    return RngStream(detail::mix64(key_ ^ detail::mix64(detail::fnv1a(label) + detail::kGolden)));
  }
  [[nodiscard]] RngStream child(std::uint64_t index) const {
    return RngStream(detail::mix64(detail::mix64(key_ + detail::kGolden) ^
                                   detail::mix64(index * 0xD1B54A32D192ED03ULL + 1)));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on the open interval (0,1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: empty range");
    // Lemire's multiply-shift with rejection keeps the draw unbiased.
    std::uint64_t x = next_u64();
    __uint128_t prod = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(prod);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        prod = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(prod);
      }
    }
    return static_cast<std::uint64_t>(prod >> 64);
  }

  /// Standard normal by Box–Muller (cosine branch only).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Inverse of Λ. Throws std::domain_error outside (0,1).
inline double standard_logistic_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::domain_error("standard_logistic_quantile: argument must lie in (0,1)");
  }
  return std::log(u) - std::log1p(-u);
}

inline double draw_logistic(RngStream& rng) { return standard_logistic_quantile(rng.uniform()); }

/// Lower Cholesky factor. Pivots ≤ tol are allowed only for an all-zero
/// row/column (an explicitly degenerate coordinate).
inline Mat cholesky_lower(const Mat& cov, double tol = 1e-10) {
  const Eigen::Index k = cov.rows();
  if (cov.cols() != k) throw std::invalid_argument("cholesky_lower: matrix not square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("cholesky_lower: matrix not symmetric");
  }
  Mat chol = Mat::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double pivot = cov(j, j);
    for (Eigen::Index p = 0; p < j; ++p) pivot -= chol(j, p) * chol(j, p);
    if (pivot <= tol) {
      const bool degenerate = cov.row(j).cwiseAbs().maxCoeff() == 0.0;
      if (!degenerate) {
        std::ostringstream msg;
        msg << "cholesky_lower: matrix not positive definite (leading minor " << (j + 1)
            << " has pivot " << pivot << ")";
        throw std::domain_error(msg.str());
      }
      continue;
    }
    chol(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < k; ++i) {
      double s = cov(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= chol(i, p) * chol(j, p);
      chol(i, j) = s / chol(j, j);
    }
  }
  return chol;
}

/// n i.i.d. rows from N(mean, cov).
inline Mat draw_mvn(RngStream& rng, const Vec& mean, const Mat& cov, Eigen::Index n) {
  if (mean.size() != cov.rows()) throw std::invalid_argument("draw_mvn: dimension mismatch");
  const Mat chol = cholesky_lower(cov);
  const Eigen::Index k = mean.size();
  Mat out(n, k);
  Vec z(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) z(j) = rng.normal();
    out.row(i) = (mean + chol * z).transpose();
  }
  return out;
}

/// Bootstrap resample: n rows drawn uniformly with replacement.
inline Dataset resample_rows(RngStream& rng, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("resample_rows: empty dataset");
  const Eigen::Index n = data.n();
  Mat rows(n, data.d());
  for (Eigen::Index i = 0; i < n; ++i) {
    rows.row(i) = data.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  }
  return data.with_rows(std::move(rows));
}

/// Fixed latent shocks for one estimation; immutable after construction.
class LatentDraws {
 public:
  LatentDraws(Mat matrix, RngState provenance)
      : matrix_(std::move(matrix)), provenance_(std::move(provenance)) {
    if (matrix_.rows() < 1) throw std::invalid_argument("LatentDraws: need at least one row");
  }
  [[nodiscard]] const Mat& matrix() const { return matrix_; }
  [[nodiscard]] Eigen::Index m() const { return matrix_.rows(); }
  [[nodiscard]] Eigen::Index q() const { return matrix_.cols(); }
  [[nodiscard]] const RngState& provenance() const { return provenance_; }

  /// Row-resampled copy (bootstrap of the latent sample).
  [[nodiscard]] LatentDraws resampled(RngStream& rng) const {
    Mat rows(m(), q());
    for (Eigen::Index i = 0; i < m(); ++i) {
      rows.row(i) = matrix_.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m()))));
    }
    return LatentDraws(std::move(rows), rng.state());
  }

 private:
  Mat matrix_;
  RngState provenance_;
};

}  // namespace advest
