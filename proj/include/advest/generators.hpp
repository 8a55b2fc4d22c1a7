#pragma once

// Structural models as deterministic maps from fixed latent shocks to
// observations, plus log-densities for the models that have one.

#include "advest/dataset.hpp"
#include "advest/math.hpp"
#include "advest/params.hpp"
#include "advest/rng.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace advest {

enum class ModelId { logistic_location, normal_location, binary_choice, roy };
enum class ErrorLaw { logistic, normal };

inline std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::logistic_location: return "logistic_location";
    case ModelId::normal_location: return "normal_location";
    case ModelId::binary_choice: return "binary_choice";
    case ModelId::roy: return "roy";
  }
  return "?";
}

inline ModelId model_from_string(const std::string& s) {
  if (s == "logistic_location") return ModelId::logistic_location;
  if (s == "normal_location") return ModelId::normal_location;
  if (s == "binary_choice") return ModelId::binary_choice;
  if (s == "roy") return ModelId::roy;
  throw std::invalid_argument("unknown model id: " + s);
}

inline std::string to_string(ErrorLaw law) { return law == ErrorLaw::logistic ? "logit" : "probit"; }

inline ErrorLaw error_law_from_string(const std::string& s) {
  if (s == "logit" || s == "logistic") return ErrorLaw::logistic;
  if (s == "probit" || s == "normal") return ErrorLaw::normal;
  throw std::invalid_argument("unknown error law: " + s);
}

struct RoyConfig {
  int quadrature_nodes = 32;
  /// Condition the period-2 expectation on period-1 shocks when rho_t != 0.
  bool conditional_expectation = true;

  friend bool operator==(const RoyConfig&, const RoyConfig&) = default;
};

struct GeneratorSpec {
  ModelId model = ModelId::logistic_location;
  /// Latent noise law for binary_choice.
  ErrorLaw error_law = ErrorLaw::logistic;
  /// Bandwidth of the smoothed indicator; 0 selects the hard indicator.
  double smoothing_h = 0.0;
  RoyConfig roy;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

inline Eigen::Index latent_dim(const GeneratorSpec& spec) {
  return spec.model == ModelId::roy ? 4 : 1;
}

inline bool is_conditional(const GeneratorSpec& spec) { return spec.model == ModelId::binary_choice; }

inline void validate(const GeneratorSpec& spec) {
  if (!std::isfinite(spec.smoothing_h) || spec.smoothing_h < 0.0) {
    throw std::invalid_argument("GeneratorSpec: smoothing bandwidth must be finite and >= 0");
  }
  if (spec.roy.quadrature_nodes < 2) {
    throw std::invalid_argument("GeneratorSpec: roy.quadrature_nodes must be >= 2");
  }
}

/// Λ(t/h); the hard indicator 1{t>=0} when h <= 0.
inline double smooth_indicator(double t, double h) {
  if (h <= 0.0) return t >= 0.0 ? 1.0 : 0.0;
  return logistic(t / h);
}

/// Latent shocks for m synthetic observations.
inline LatentDraws draw_latent(const GeneratorSpec& spec, RngStream rng, Eigen::Index m) {
  const RngState origin = rng.state();
  Mat draws(m, latent_dim(spec));
  for (Eigen::Index i = 0; i < m; ++i) {
    switch (spec.model) {
      case ModelId::logistic_location: draws(i, 0) = draw_logistic(rng); break;
      case ModelId::normal_location: draws(i, 0) = rng.normal(); break;
      case ModelId::binary_choice:
        draws(i, 0) = spec.error_law == ErrorLaw::logistic ? draw_logistic(rng) : rng.normal();
        break;
      case ModelId::roy:
        for (int j = 0; j < 4; ++j) draws(i, j) = rng.normal();
        break;
    }
  }
  return LatentDraws(std::move(draws), origin);
}

// ---------------------------------------------------------------- Roy model

/// Parameters of the two-sector, two-period Roy model read from a ParamVector.
struct RoyParams {
  double mu1, mu2, gamma1, gamma2, sigma1, sigma2, rho_s, rho_t, beta;

  static RoyParams from(const ParamVector& theta) {
    RoyParams p{theta.get("mu1"),    theta.get("mu2"),    theta.get("gamma1"),
                theta.get("gamma2"), theta.get("sigma1"), theta.get("sigma2"),
                theta.get("rho_s"),  theta.get_or("rho_t", 0.0), theta.get_or("beta", 0.9)};
    if (!(std::abs(p.rho_s) < 1.0) || !(std::abs(p.rho_t) < 1.0)) {
      throw std::domain_error("roy: correlations must satisfy |rho| < 1");
    }
    if (!(p.sigma1 >= 0.0) || !(p.sigma2 >= 0.0)) {
      throw std::domain_error("roy: scale parameters must be non-negative");
    }
    return p;
  }
};

namespace detail {

/// E[max(e^{a1+u1}, e^{a2+u2})], u ~ N(0, S) with sd (s1, s2) and correlation r.
class LognormalMaxIntegrator {
 public:
  LognormalMaxIntegrator(double s1, double s2, double r, int nodes) {
    degenerate_ = s1 == 0.0 && s2 == 0.0;
    if (degenerate_) return;
    const auto& rule = gauss_hermite(nodes);
    const double c = std::sqrt(2.0);
    const double tail = std::sqrt(std::max(0.0, 1.0 - r * r));
    for (int i = 0; i < nodes; ++i) {
      for (int j = 0; j < nodes; ++j) {
        const double t1 = c * rule.nodes[static_cast<std::size_t>(i)];
        const double t2 = c * rule.nodes[static_cast<std::size_t>(j)];
        exp_u1_.push_back(std::exp(s1 * t1));
        exp_u2_.push_back(std::exp(s2 * (r * t1 + tail * t2)));
        weight_.push_back(rule.weights[static_cast<std::size_t>(i)] *
                          rule.weights[static_cast<std::size_t>(j)] / std::numbers::pi);
      }
    }
  }

  [[nodiscard]] double operator()(double a1, double a2) const {
    const double e1 = std::exp(a1);
    const double e2 = std::exp(a2);
    if (degenerate_) return std::max(e1, e2);
    double acc = 0.0;
    for (std::size_t k = 0; k < weight_.size(); ++k) {
      acc += weight_[k] * std::max(e1 * exp_u1_[k], e2 * exp_u2_[k]);
    }
    return acc;
  }

 private:
  bool degenerate_ = false;
  std::vector<double> exp_u1_, exp_u2_, weight_;
};

inline double period2_mean(const RoyParams& p, int sector, int wage_sector) {
  if (wage_sector == 1) return p.mu1 + (sector == 1 ? p.gamma1 : 0.0);
  return p.mu2 + (sector == 2 ? p.gamma2 : 0.0);
}

inline bool uses_conditional(const RoyParams& p, const RoyConfig& cfg) {
  return cfg.conditional_expectation && p.rho_t != 0.0;
}

inline LognormalMaxIntegrator period2_integrator(const RoyParams& p, const RoyConfig& cfg) {
  const double shrink = uses_conditional(p, cfg) ? std::sqrt(1.0 - p.rho_t * p.rho_t) : 1.0;
  return {p.sigma1 * shrink, p.sigma2 * shrink, p.rho_s, cfg.quadrature_nodes};
}

}  // namespace detail

/// E[max_s' w_{2s'} | d1 = sector, info]. Period-1 shocks (eps11, eps12) are
/// required when the expectation is conditional and rho_t != 0.
inline double roy_expected_period2(const ParamVector& theta, int sector,
                                   const std::optional<Eigen::Vector2d>& period1_shocks = std::nullopt,
                                   const RoyConfig& cfg = {}) {
  if (sector != 1 && sector != 2) throw std::invalid_argument("roy: sector must be 1 or 2");
  const RoyParams p = RoyParams::from(theta);
  double a1 = detail::period2_mean(p, sector, 1);
  double a2 = detail::period2_mean(p, sector, 2);
  if (detail::uses_conditional(p, cfg)) {
    if (!period1_shocks) {
      throw std::invalid_argument("roy: period-1 shocks required for the conditional expectation");
    }
    a1 += p.rho_t * (*period1_shocks)(0);
    a2 += p.rho_t * (*period1_shocks)(1);
  }
  return detail::period2_integrator(p, cfg)(a1, a2);
}

/// Lower Cholesky factor of the 4×4 Roy shock covariance in the order
/// (eps11, eps12, eps21, eps22); it factors as chol(R_t) ⊗ chol(A).
inline Mat roy_shock_factor(const RoyParams& p) {
  Eigen::Matrix2d a;
  a << p.sigma1, 0.0, p.rho_s * p.sigma2, p.sigma2 * std::sqrt(1.0 - p.rho_s * p.rho_s);
  Mat chol = Mat::Zero(4, 4);
  chol.block<2, 2>(0, 0) = a;
  chol.block<2, 2>(2, 0) = p.rho_t * a;
  chol.block<2, 2>(2, 2) = std::sqrt(1.0 - p.rho_t * p.rho_t) * a;
  return chol;
}

inline Mat roy_shock_covariance(const RoyParams& p) {
  const Mat chol = roy_shock_factor(p);
  return chol * chol.transpose();
}

// --------------------------------------------------------------- simulation

inline Dataset make_dataset(const GeneratorSpec& spec, Mat rows) {
  switch (spec.model) {
    case ModelId::logistic_location:
    case ModelId::normal_location:
      return Dataset(std::move(rows), {ColumnRole::outcome}, {"x"});
    case ModelId::binary_choice:
      return Dataset(std::move(rows), {ColumnRole::outcome, ColumnRole::covariate}, {"y", "x"});
    case ModelId::roy:
      return Dataset(std::move(rows), std::vector<ColumnRole>(4, ColumnRole::outcome),
                     {"log_w1", "d1", "log_w2", "d2"});
  }
  throw std::logic_error("make_dataset: unreachable");
}

/// X_i = T_θ(X̃_i). For binary_choice the covariates are recycled row by row.
inline Dataset simulate(const GeneratorSpec& spec, const ParamVector& theta, const LatentDraws& latent,
                        const Dataset* covariates = nullptr) {
  validate(spec);
  theta.require_in_bounds();
  if (latent.q() != latent_dim(spec)) {
    throw std::invalid_argument("simulate: latent dimension does not match model " + to_string(spec.model));
  }
  if (is_conditional(spec) != (covariates != nullptr)) {
    throw std::invalid_argument("simulate: covariates must be supplied iff the model is conditional");
  }
  const Mat& z = latent.matrix();
  const Eigen::Index m = latent.m();
  Mat out;
  switch (spec.model) {
    case ModelId::logistic_location:
    case ModelId::normal_location: {
      out = z.array() + theta.get("theta");
      break;
    }
    case ModelId::binary_choice: {
      if (covariates->n() != m) throw std::invalid_argument("simulate: covariate rows must equal m");
      const Eigen::Index xcol = covariates->d() == 1 ? 0 : covariates->column("x");
      const double slope = theta.get("theta");
      out.resize(m, 2);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double x = (*covariates)(i, xcol);
        out(i, 0) = smooth_indicator(slope * x + z(i, 0), spec.smoothing_h);
        out(i, 1) = x;
      }
      break;
    }
    case ModelId::roy: {
      const RoyParams p = RoyParams::from(theta);
      const Mat chol = roy_shock_factor(p);
      const auto integ = detail::period2_integrator(p, spec.roy);
      const bool conditional = detail::uses_conditional(p, spec.roy);
      double e1 = 0.0, e2 = 0.0;
      if (!conditional) {
        e1 = integ(detail::period2_mean(p, 1, 1), detail::period2_mean(p, 1, 2));
        e2 = integ(detail::period2_mean(p, 2, 1), detail::period2_mean(p, 2, 2));
      }
      out.resize(m, 4);
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Vector4d eps = chol * z.row(i).transpose();
        if (conditional) {
          e1 = integ(detail::period2_mean(p, 1, 1) + p.rho_t * eps(0),
                     detail::period2_mean(p, 1, 2) + p.rho_t * eps(1));
          e2 = integ(detail::period2_mean(p, 2, 1) + p.rho_t * eps(0),
                     detail::period2_mean(p, 2, 2) + p.rho_t * eps(1));
        }
        const double lw11 = p.mu1 + eps(0);
        const double lw12 = p.mu2 + eps(1);
        // Sector 1 wins exact ties.
        const int d1 = std::exp(lw11) + p.beta * e1 >= std::exp(lw12) + p.beta * e2 ? 1 : 2;
        const double lw21 = detail::period2_mean(p, d1, 1) + eps(2);
        const double lw22 = detail::period2_mean(p, d1, 2) + eps(3);
        const int d2 = lw21 >= lw22 ? 1 : 2;
        out(i, 0) = d1 == 1 ? lw11 : lw12;
        out(i, 1) = d1;
        out(i, 2) = d2 == 1 ? lw21 : lw22;
        out(i, 3) = d2;
      }
      break;
    }
  }
  return make_dataset(spec, std::move(out));
}

// ------------------------------------------------------------ log-densities

/// log p_θ(x) with an explicit support flag; value is -inf iff !supported.
struct LogDensity {
  double value = 0.0;
  bool supported = true;

  static LogDensity unsupported() { return {-kInf, false}; }
};

inline bool has_likelihood(const GeneratorSpec& spec, const ParamVector& theta) {
  return spec.model != ModelId::roy || theta.get_or("rho_t", 0.0) == 0.0;
}

template <typename Row>
LogDensity log_density(const GeneratorSpec& spec, const ParamVector& theta, const Row& x) {
  switch (spec.model) {
    case ModelId::logistic_location: {
      const double z = x(0) - theta.get("theta");
      return {-std::abs(z) - 2.0 * std::log1p(std::exp(-std::abs(z))), true};
    }
    case ModelId::normal_location: {
      const double z = x(0) - theta.get("theta");
      return {-0.5 * kLog2Pi - 0.5 * z * z, true};
    }
    case ModelId::binary_choice: {
      const double y = x(0);
      const double index = theta.get("theta") * x(1);
      double l1, l0;
      if (spec.error_law == ErrorLaw::logistic) {
        l1 = log_logistic(index);
        l0 = log1m_logistic(index);
      } else {
        l1 = log_normal_cdf(index);
        l0 = log_normal_cdf(-index);
      }
      return {y * l1 + (1.0 - y) * l0, true};
    }
    case ModelId::roy: {
      if (!has_likelihood(spec, theta)) {
        throw std::domain_error("roy: no closed-form likelihood when rho_t != 0");
      }
      const RoyParams p = RoyParams::from(theta);
      if (p.sigma1 <= 0.0 || p.sigma2 <= 0.0) throw std::domain_error("roy: likelihood needs sigma > 0");
      const auto integ = detail::period2_integrator(p, spec.roy);
      const double e1 = integ(detail::period2_mean(p, 1, 1), detail::period2_mean(p, 1, 2));
      const double e2 = integ(detail::period2_mean(p, 2, 1), detail::period2_mean(p, 2, 2));
      const double tail = std::sqrt(1.0 - p.rho_s * p.rho_s);
      const double lw1 = x(0), lw2 = x(2);
      const int d1 = x(1) == 1.0 ? 1 : 2;
      const int d2 = x(3) == 1.0 ? 1 : 2;
      auto log_phi = [](double z, double s) { return -0.5 * kLog2Pi - std::log(s) - 0.5 * (z / s) * (z / s); };

      double ll = 0.0;
      // Period 1: density of the chosen wage times the probability that the
      // other sector's value falls below the choice threshold.
      const double own_mu = d1 == 1 ? p.mu1 : p.mu2;
      const double own_s = d1 == 1 ? p.sigma1 : p.sigma2;
      const double oth_mu = d1 == 1 ? p.mu2 : p.mu1;
      const double oth_s = d1 == 1 ? p.sigma2 : p.sigma1;
      const double gap = d1 == 1 ? p.beta * (e1 - e2) : p.beta * (e2 - e1);
      const double threshold = std::exp(lw1) + gap;
      if (threshold <= 0.0) return LogDensity::unsupported();
      const double eps_own = lw1 - own_mu;
      const double cond_mean = oth_mu + p.rho_s * oth_s / own_s * eps_own;
      ll += log_phi(eps_own, own_s) + log_normal_cdf((std::log(threshold) - cond_mean) / (oth_s * tail));
      // Period 2: static choice between the two realized wages.
      const double m1 = detail::period2_mean(p, d1, 1);
      const double m2 = detail::period2_mean(p, d1, 2);
      if (d2 == 1) {
        const double e = lw2 - m1;
        ll += log_phi(e, p.sigma1) +
              log_normal_cdf((lw2 - (m2 + p.rho_s * p.sigma2 / p.sigma1 * e)) / (p.sigma2 * tail));
      } else {
        const double e = lw2 - m2;
        ll += log_phi(e, p.sigma2) +
              log_normal_cdf((lw2 - (m1 + p.rho_s * p.sigma1 / p.sigma2 * e)) / (p.sigma1 * tail));
      }
      if (!std::isfinite(ll)) return LogDensity::unsupported();
      return {ll, true};
    }
  }
  throw std::logic_error("log_density: unreachable");
}

// ---------------------------------------------------------- data-generating law

/// Covariate law for conditional models (x ~ N(mean, sd²)).
struct CovariateLaw {
  bool present = false;
  double mean = 1.0;
  double sd = 1.0;

  friend bool operator==(const CovariateLaw&, const CovariateLaw&) = default;
};

/// The law producing the "real" sample; it may differ from the fitted model.
struct DataLaw {
  GeneratorSpec spec;
  ParamVector theta;
  CovariateLaw covariates;

  friend bool operator==(const DataLaw&, const DataLaw&) = default;
};

inline Dataset draw_covariates(const CovariateLaw& law, RngStream rng, Eigen::Index n) {
  Mat x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = law.mean + law.sd * rng.normal();
  return Dataset(std::move(x), {ColumnRole::covariate}, {"x"});
}

/// n real observations; covariates (if any) and shocks come from labelled child streams.
inline Dataset draw_real(const DataLaw& law, const RngStream& rng, Eigen::Index n) {
  const LatentDraws shocks = draw_latent(law.spec, rng.child("shocks"), n);
  if (is_conditional(law.spec)) {
    const Dataset x = draw_covariates(law.covariates, rng.child("covariates"), n);
    return simulate(law.spec, law.theta, shocks, &x);
  }
  return simulate(law.spec, law.theta, shocks);
}

/// Covariate columns of a dataset (used to recycle them into synthetic data).
inline Dataset covariate_columns(const Dataset& data) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < data.roles().size(); ++j) {
    if (data.roles()[j] == ColumnRole::covariate) cols.push_back(static_cast<Eigen::Index>(j));
  }
  Mat x(data.n(), static_cast<Eigen::Index>(cols.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = data.rows().col(cols[k]);
    names.push_back(data.names()[static_cast<std::size_t>(cols[k])]);
  }
  return Dataset(std::move(x), std::vector<ColumnRole>(cols.size(), ColumnRole::covariate), names);
}

}  // namespace advest
