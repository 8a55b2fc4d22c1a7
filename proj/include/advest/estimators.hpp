#pragma once

#include "advest/discriminators.hpp"
#include "advest/generators.hpp"
#include "advest/objective.hpp"
#include "advest/optimize.hpp"
#include "advest/params.hpp"

#include <cmath>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

namespace advest {

enum class EstimatorKind { adversarial, mle, qmle, smm, ii };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::adversarial: return "adversarial";
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::qmle: return "qmle";
    case EstimatorKind::smm: return "smm";
    case EstimatorKind::ii: return "ii";
  }
  return "?";
}

struct EstimateReport {
  EstimatorKind method = EstimatorKind::adversarial;
  ParamVector theta_hat;
  double criterion = kInf;
  int evaluations = 0;
  bool converged = false;
  bool improved_on_seed = false;
  /// False when the optimum still has an unsupported observation (MLE only).
  bool feasible = true;
  std::vector<TracePoint> trace;
};

inline EstimateReport to_report(EstimatorKind kind, OptimResult&& r) {
  EstimateReport out;
  out.method = kind;
  out.theta_hat = std::move(r.best);
  out.criterion = r.value;
  out.evaluations = r.evaluations;
  out.converged = r.converged;
  out.improved_on_seed = r.improved_on_seed;
  out.trace = std::move(r.trace);
  return out;
}

// -------------------------------------------------------------- adversarial

inline EstimateReport adversarial_estimate(const EstimationContext& ctx, const OptimizerConfig& opt,
                                           const RngStream& rng = RngStream(0)) {
  auto f = [&](const ParamVector& th) { return profiled_loss(th, ctx).value; };
  return to_report(EstimatorKind::adversarial, minimize(f, ctx.theta, opt, rng));
}

// ---------------------------------------------------------------------- MLE

/// Half negative mean log-likelihood, -(1/2n) Σ log p(X_i | θ); +inf (with `supported` false) on support failure.
struct HalfNegLogLik {
  double value = 0.0;
  bool supported = true;
};

inline HalfNegLogLik half_neg_loglik(const GeneratorSpec& spec, const ParamVector& theta, const Dataset& data) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const LogDensity l = log_density(spec, theta, data.row(i));
    if (!l.supported) return {kInf, false};
    total += l.value;
  }
  return {-total / (2.0 * static_cast<double>(data.n())), true};
}

/// Maximum likelihood (quasi-MLE when `spec` differs from the data law).
inline EstimateReport mle_estimate(const GeneratorSpec& spec, const ParamVector& start, const Dataset& data,
                                   const OptimizerConfig& opt, EstimatorKind tag = EstimatorKind::mle,
                                   const RngStream& rng = RngStream(0)) {
  if (!has_likelihood(spec, start)) throw std::domain_error("mle_estimate: no closed-form likelihood");
  if (spec.model == ModelId::normal_location) {
    // The normal-location score is linear in θ: the sample mean is exact.
    const double mean = data.rows().col(0).mean();
    EstimateReport out;
    out.method = tag;
    out.theta_hat = start.with("theta", mean);
    out.criterion = half_neg_loglik(spec, out.theta_hat, data).value;
    out.evaluations = 1;
    out.converged = true;
    out.improved_on_seed = true;
    out.trace.push_back({out.theta_hat.values(), out.criterion});
    return out;
  }
  ParamVector seed = start;
  if (!half_neg_loglik(spec, seed, data).supported) {
    RngStream probe = rng.child("feasible-start");
    bool found = false;
    for (int attempt = 0; attempt < 50 && !found; ++attempt) {
      Vec z = start.to_internal();
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += 0.25 * (1 + attempt / 10) * probe.normal();
      const ParamVector trial = start.from_internal(z);
      if (trial.in_bounds() && half_neg_loglik(spec, trial, data).supported) {
        seed = trial;
        found = true;
      }
    }
    if (!found) throw std::runtime_error("mle_estimate: start is outside the support and no feasible neighbor was found");
  }
  auto f = [&](const ParamVector& th) { return half_neg_loglik(spec, th, data).value; };
  EstimateReport out = to_report(tag, minimize(f, seed, opt, rng));
  out.feasible = std::isfinite(out.criterion);
  return out;
}

/// Closed-form normal-location MLE computed by the generic simplex, for cross-checks.
inline EstimateReport mle_estimate_iterative(const GeneratorSpec& spec, const ParamVector& start, const Dataset& data,
                                             const OptimizerConfig& opt) {
  auto f = [&](const ParamVector& th) { return half_neg_loglik(spec, th, data).value; };
  return to_report(EstimatorKind::mle, minimize(f, start, opt));
}

// ---------------------------------------------------------------------- SMM

enum class Weighting { identity, optimal };

inline std::string to_string(Weighting w) { return w == Weighting::identity ? "identity" : "optimal"; }

inline Weighting weighting_from_string(const std::string& s) {
  if (s == "identity") return Weighting::identity;
  if (s == "optimal") return Weighting::optimal;
  throw std::invalid_argument("unknown weighting: " + s);
}

namespace detail {

/// Inverse covariance of the rows of g via their correlation matrix, with a
/// ridge added when the reciprocal condition number drops below 1e-13.
inline Mat inverse_covariance(const Mat& g) {
  const Eigen::Index k = g.cols();
  const Vec mean = g.colwise().mean();
  const Mat centered = g.rowwise() - mean.transpose();
  Mat cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(1, g.rows() - 1));
  Vec sd = cov.diagonal().array().sqrt();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(sd(j) > 0.0)) throw std::domain_error("inverse_covariance: moment with zero variance");
  }
  Mat corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat> es(corr);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  if (!(emin > 1e-13 * emax)) {
    const double ridge = 1e-13 * emax - std::min(emin, 0.0);
    corr.diagonal().array() += ridge;
    es.compute(corr);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw std::domain_error("inverse_covariance: singular beyond ridge");
  }
  const Mat inv_corr = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return sd.cwiseInverse().asDiagonal() * inv_corr * sd.cwiseInverse().asDiagonal();
}

}  // namespace detail

/// SMM over moment functions given as a feature map (constant features are ignored).
inline EstimateReport smm_estimate(const FeatureMap& moments, const EstimationContext& ctx, Weighting weighting,
                                   const OptimizerConfig& opt, const RngStream& rng = RngStream(0)) {
  FeatureMap active{moments.name, {}};
  for (const auto& f : moments.features) {
    if (f.kind != Feature::Kind::constant) active.features.push_back(f);
  }
  if (active.size() < static_cast<Eigen::Index>(ctx.theta.size())) {
    throw std::invalid_argument("smm_estimate: fewer moments than parameters");
  }
  const Mat real_rows = active.eval_all(ctx.real);
  const Vec target = real_rows.colwise().mean();
  const Mat w = weighting == Weighting::optimal ? detail::inverse_covariance(real_rows)
                                                : Mat::Identity(active.size(), active.size());
  auto f = [&](const ParamVector& th) {
    const Vec diff = target - active.eval_all(ctx.synthesize(th)).colwise().mean().transpose();
    return diff.dot(w * diff);
  };
  return to_report(EstimatorKind::smm, minimize(f, ctx.theta, opt, rng));
}

// ----------------------------------------------------- indirect inference

/// Polynomial probit P(y=1|x) = Φ(z'β), z = (1, x, ..., x^d).
struct ProbitFit {
  int degree = 1;
  Vec beta;   // coefficients on raw z
  Vec index;  // fitted z'β at the sample rows, computed in the orthonormal basis
  bool converged = false;
  int iterations = 0;
};

inline Mat probit_design(const Vec& x, int degree) {
  Mat z(x.size(), degree + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      z(i, k) = p;
      p *= x(i);
    }
  }
  return z;
}

/// Per-row score y φ/Φ z - (1-y) φ/(1-Φ) z at the given indices (y may be fractional).
inline Mat probit_score_rows_at(const Mat& z, const Vec& y, const Vec& index) {
  Mat s(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double t = index(i);
    const double c = y(i) * normal_hazard_lower(t) - (1.0 - y(i)) * normal_hazard_lower(-t);
    s.row(i) = c * z.row(i);
  }
  return s;
}

inline Mat probit_score_rows(const Mat& z, const Vec& y, const Vec& beta) {
  return probit_score_rows_at(z, y, z * beta);
}

/// Newton ascent on the probit log-likelihood in an orthonormal basis of the
/// polynomial design (thin QR), which keeps degree-11 fits well conditioned.
/// Converges when the Newton decrement g'H⁻¹g falls below `tol`.
inline ProbitFit fit_probit(const Vec& x, const Vec& y, int degree, int max_iters = 100, double tol = 1e-12) {
  if (degree < 1) throw std::invalid_argument("fit_probit: degree must be >= 1");
  const Mat z = probit_design(x, degree);
  const Eigen::Index n = z.rows(), k = z.cols();
  if (n <= k) throw std::invalid_argument("fit_probit: need more rows than coefficients");
  Eigen::HouseholderQR<Mat> qr(z);
  const Mat q = qr.householderQ() * Mat::Identity(n, k);
  const Mat rmat = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const double root_n = std::sqrt(static_cast<double>(n));
  const Mat zq = q * root_n;
  auto loglik = [&](const Vec& b) {
    const Vec t = zq * b;
    double v = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) v += y(i) * log_normal_cdf(t(i)) + (1.0 - y(i)) * log_normal_cdf(-t(i));
    return v / static_cast<double>(n);
  };
  Vec b = Vec::Zero(k);
  double value = loglik(b);
  ProbitFit fit;
  fit.degree = degree;
  double decrement = kInf;
  for (int it = 0; it < max_iters; ++it) {
    const Vec t = zq * b;
    Vec g = Vec::Zero(k);
    Mat h = Mat::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double l1 = normal_hazard_lower(t(i)), l0 = normal_hazard_lower(-t(i));
      const double c = y(i) * l1 - (1.0 - y(i)) * l0;
      // Negative second derivative of the row log-likelihood in the index.
      const double w = y(i) * l1 * (t(i) + l1) + (1.0 - y(i)) * l0 * (l0 - t(i));
      g += c * zq.row(i).transpose();
      h.noalias() += w * zq.row(i).transpose() * zq.row(i);
    }
    g /= static_cast<double>(n);
    h /= static_cast<double>(n);
    fit.iterations = it;
    h.diagonal().array() += 1e-14;
    const Vec step = h.ldlt().solve(g);
    decrement = g.dot(step);
    if (decrement <= tol) {
      fit.converged = true;
      break;
    }
    double s = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 50; ++halving, s *= 0.5) {
      const Vec trial = b + s * step;
      const double tv = loglik(trial);
      if (std::isfinite(tv) && tv > value) {
        b = trial;
        value = tv;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Rounding floor: accept when the remaining gain is at machine precision.
      fit.converged = decrement <= 1e-14;
      break;
    }
  }
  if (!fit.converged || b.lpNorm<Eigen::Infinity>() > 1e6) {
    std::ostringstream msg;
    msg << "fit_probit: no convergence (degree " << degree << ", |b|_inf = " << b.lpNorm<Eigen::Infinity>()
        << ", Newton decrement " << decrement << ", mean log-likelihood " << value << "); the sample may be separated";
    throw std::runtime_error(msg.str());
  }
  fit.index = zq * b;
  fit.beta = rmat.triangularView<Eigen::Upper>().solve(root_n * b);
  return fit;
}

/// Score generator II for binary_choice: minimize a norm of the mean auxiliary
/// score at the synthetic sample and the real-data probit fit.
inline EstimateReport ii_estimate(int degree, const EstimationContext& ctx, Weighting weighting,
                                  const OptimizerConfig& opt, const RngStream& rng = RngStream(0)) {
  if (ctx.model.model != ModelId::binary_choice) throw std::invalid_argument("ii_estimate: binary_choice only");
  const Eigen::Index xcol = ctx.real.column("x"), ycol = ctx.real.column("y");
  const Vec x = ctx.real.rows().col(xcol), y = ctx.real.rows().col(ycol);
  const ProbitFit fit = fit_probit(x, y, degree);
  const Mat z = probit_design(x, degree);
  Mat w = Mat::Identity(z.cols(), z.cols());
  if (weighting == Weighting::optimal) w = detail::inverse_covariance(probit_score_rows_at(z, y, fit.index));
  auto f = [&](const ParamVector& th) {
    const Dataset synth = ctx.synthesize(th);
    const Vec ys = synth.rows().col(synth.column("y"));
    const Vec xs = synth.rows().col(synth.column("x"));
    // Recycled covariates reuse the fitted index; fresh ones go through β.
    const Mat zs = probit_design(xs, degree);
    const Vec index = xs == x ? fit.index : Vec(zs * fit.beta);
    const Vec s = probit_score_rows_at(zs, ys, index).colwise().mean();
    return s.dot(w * s);
  };
  return to_report(EstimatorKind::ii, minimize(f, ctx.theta, opt, rng));
}

}  // namespace advest
