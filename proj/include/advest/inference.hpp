#pragma once

#include "advest/estimators.hpp"
#include "advest/generators.hpp"
#include "advest/objective.hpp"
#include "advest/rng.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace advest {

// ---------------------------------------------------------------- parallelism

/// Job count from ADVEST_JOBS, else the hardware concurrency.
inline int default_jobs() {
  if (const char* env = std::getenv("ADVEST_JOBS")) {
    const int j = std::atoi(env);
    if (j >= 1) return j;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(i) for i in [0, count) on `jobs` threads. Tasks are claimed from a
/// shared counter; results must be written to per-index slots.
template <typename F>
void parallel_for(std::size_t count, int jobs, F&& f) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ------------------------------------------------------------ MC summaries

struct Histogram {
  std::vector<double> edges;
  std::vector<long> counts;
};

/// Freedman–Diaconis binning.
inline Histogram histogram(std::vector<double> v) {
  Histogram h;
  if (v.empty()) return h;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double span = v.back() - v.front();
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
  int bins = 1;
  if (width > 0.0 && span > 0.0) bins = std::clamp(static_cast<int>(std::ceil(span / width)), 1, 1000);
  width = span > 0.0 ? span / bins : 1.0;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(v.front() + b * width);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double x : v) {
    int b = span > 0.0 ? static_cast<int>((x - v.front()) / width) : 0;
    h.counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  return h;
}

struct McSummary {
  std::vector<std::string> names;
  Eigen::Index n = 0;
  Mat draws;               // R×k; rows of failed replications are NaN
  std::vector<bool> ok;
  int failures = 0;
  std::vector<std::string> failure_log;
  Vec mean, sd, sqrt_n_sd;
  std::vector<Histogram> histograms;

  [[nodiscard]] int replications() const { return static_cast<int>(draws.rows()); }
  [[nodiscard]] int successes() const { return replications() - failures; }

  /// MC standard error of the mean of coordinate j.
  [[nodiscard]] double mean_se(Eigen::Index j) const { return sd(j) / std::sqrt(static_cast<double>(std::max(1, successes()))); }

  [[nodiscard]] std::vector<double> column(Eigen::Index j) const {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      if (ok[static_cast<std::size_t>(r)]) v.push_back(draws(r, j));
    }
    return v;
  }
};

/// Statistics over successful rows only.
inline McSummary summarize(std::vector<std::string> names, Mat draws, std::vector<bool> ok, Eigen::Index n,
                           std::vector<std::string> failure_log = {}) {
  McSummary s;
  s.names = std::move(names);
  s.n = n;
  s.draws = std::move(draws);
  s.ok = std::move(ok);
  s.failure_log = std::move(failure_log);
  for (bool b : s.ok) s.failures += b ? 0 : 1;
  const Eigen::Index k = s.draws.cols();
  s.mean = Vec::Constant(k, std::numeric_limits<double>::quiet_NaN());
  s.sd = s.mean;
  s.sqrt_n_sd = s.mean;
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto col = s.column(j);
    if (col.empty()) continue;
    s.mean(j) = sample_mean(col);
    s.sd(j) = sample_sd(col);
    s.sqrt_n_sd(j) = std::sqrt(static_cast<double>(n)) * s.sd(j);
    s.histograms.push_back(histogram(col));
  }
  return s;
}

/// Per-replication stream: master.child("rep").child(r).
inline RngStream replication_stream(std::uint64_t seed, std::size_t r) {
  return RngStream(seed).child("rep").child(static_cast<std::uint64_t>(r));
}

/// R replications of `replicate(r, stream) -> estimate`; exceptions become
/// recorded failures.
inline McSummary monte_carlo(int reps, std::uint64_t seed, int jobs, std::vector<std::string> names, Eigen::Index n,
                             const std::function<Vec(std::size_t, const RngStream&)>& replicate) {
  if (reps < 1) throw std::invalid_argument("monte_carlo: reps must be >= 1");
  const auto k = static_cast<Eigen::Index>(names.size());
  Mat draws = Mat::Constant(reps, k, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
  std::vector<std::string> errors(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), jobs, [&](std::size_t r) {
    try {
      const Vec est = replicate(r, replication_stream(seed, r));
      if (est.size() != k) throw std::logic_error("replication returned wrong dimension");
      if (!est.allFinite()) throw std::runtime_error("non-finite estimate");
      draws.row(static_cast<Eigen::Index>(r)) = est.transpose();
      ok[r] = 1;
    } catch (const std::exception& e) {
      errors[r] = "replication " + std::to_string(r) + ": " + e.what();
    }
  });
  std::vector<std::string> log;
  for (const auto& e : errors) {
    if (!e.empty()) log.push_back(e);
  }
  return summarize(std::move(names), std::move(draws), std::vector<bool>(ok.begin(), ok.end()), n, std::move(log));
}

// --------------------------------------------------------------- bootstrap

struct BootstrapResult {
  std::vector<std::string> names;
  Mat draws;  // B×k (failures NaN)
  std::vector<bool> ok;
  Vec se;
  int failures = 0;
  std::vector<std::string> failure_log;
};

/// Context with real rows and latent rows both resampled with replacement.
inline EstimationContext bootstrap_context(const EstimationContext& ctx, const RngStream& stream) {
  EstimationContext out = ctx;
  RngStream real_rng = stream.child("real");
  RngStream latent_rng = stream.child("latent");
  out.real = resample_rows(real_rng, ctx.real);
  out.latent = ctx.latent.resampled(latent_rng);
  return out;
}

/// B re-estimations on resampled (real, latent) pairs. The discriminator spec
/// and training configuration are carried unchanged.
inline BootstrapResult bootstrap_se(const EstimationContext& ctx, int boots, std::uint64_t seed, int jobs,
                                    const std::function<Vec(const EstimationContext&, const RngStream&)>& estimate) {
  if (boots < 2) throw std::invalid_argument("bootstrap_se: need B >= 2");
  std::vector<std::string> names;
  for (const auto& e : ctx.theta.entries()) names.push_back(e.name);
  const auto k = static_cast<Eigen::Index>(names.size());
  BootstrapResult out;
  out.names = names;
  out.draws = Mat::Constant(boots, k, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(static_cast<std::size_t>(boots), 0);
  std::vector<std::string> errors(static_cast<std::size_t>(boots));
  const RngStream master = RngStream(seed).child("bootstrap");
  parallel_for(static_cast<std::size_t>(boots), jobs, [&](std::size_t b) {
    try {
      const RngStream stream = master.child(static_cast<std::uint64_t>(b));
      const Vec est = estimate(bootstrap_context(ctx, stream), stream.child("estimate"));
      if (est.size() != k || !est.allFinite()) throw std::runtime_error("invalid bootstrap estimate");
      out.draws.row(static_cast<Eigen::Index>(b)) = est.transpose();
      ok[b] = 1;
    } catch (const std::exception& e) {
      errors[b] = "draw " + std::to_string(b) + ": " + e.what();
    }
  });
  out.ok.assign(ok.begin(), ok.end());
  for (std::size_t b = 0; b < errors.size(); ++b) {
    if (!ok[b]) {
      ++out.failures;
      out.failure_log.push_back(errors[b]);
    }
  }
  if (out.failures > boots / 5) {
    std::string msg = "bootstrap_se: " + std::to_string(out.failures) + " of " + std::to_string(boots) + " draws failed";
    if (!out.failure_log.empty()) msg += "; first: " + out.failure_log.front();
    throw std::runtime_error(msg);
  }
  out.se = Vec(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col;
    for (Eigen::Index b = 0; b < boots; ++b) {
      if (out.ok[static_cast<std::size_t>(b)]) col.push_back(out.draws(b, j));
    }
    out.se(j) = sample_sd(col);
  }
  return out;
}

// ------------------------------------------------------------ loss surfaces

struct SeriesSelector {
  bool profiled = true;
  bool oracle = true;
  bool loglik = true;
};

struct LossSurface {
  std::string coordinate;
  ParamVector anchor;  // values at which the other coordinates are held
  std::vector<double> grid;
  std::vector<double> profiled, oracle, loglik;
  std::vector<bool> supported;

  [[nodiscard]] bool has_oracle() const { return !oracle.empty(); }
  [[nodiscard]] bool has_loglik() const { return !loglik.empty(); }
};

inline std::vector<double> demeaned(const std::vector<double>& v) {
  double s = 0.0;
  int k = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++k;
    }
  }
  std::vector<double> out(v);
  if (k == 0) return out;
  for (double& x : out) x -= s / k;
  return out;
}

/// Scans one coordinate with the others held at ctx.theta. The oracle series
/// needs the real-data law; the likelihood series needs a tractable density and is +inf
/// (supported = false) where some real observation has zero density.
inline LossSurface surface_scan(const EstimationContext& ctx, const std::string& coordinate,
                                const std::vector<double>& grid, SeriesSelector series = {}, int jobs = 1) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("surface_scan: grid must be strictly increasing");
  }
  LossSurface s;
  s.coordinate = coordinate;
  s.anchor = ctx.theta;
  s.grid = grid;
  const bool want_oracle = series.oracle && ctx.truth && has_likelihood(ctx.truth->spec, ctx.truth->theta) &&
                           has_likelihood(ctx.model, ctx.theta);
  const bool want_loglik = series.loglik && has_likelihood(ctx.model, ctx.theta);
  const std::size_t g = grid.size();
  if (series.profiled) s.profiled.assign(g, std::numeric_limits<double>::quiet_NaN());
  if (want_oracle) s.oracle.assign(g, std::numeric_limits<double>::quiet_NaN());
  if (want_loglik) s.loglik.assign(g, kInf);
  s.supported.assign(g, true);
  std::vector<char> supported(g, 1);
  parallel_for(g, jobs, [&](std::size_t i) {
    const ParamVector th = ctx.theta.with(coordinate, grid[i]);
    if (series.profiled) s.profiled[i] = profiled_loss(th, ctx).value;
    if (want_oracle) s.oracle[i] = oracle_loss(th, ctx).value;
    if (want_loglik) {
      const HalfNegLogLik l = half_neg_loglik(ctx.model, th, ctx.real);
      s.loglik[i] = l.value;
      supported[i] = l.supported ? 1 : 0;
    }
  });
  s.supported.assign(supported.begin(), supported.end());
  return s;
}

// ----------------------------------------------------------- curvature fits

struct QuadraticFit {
  double curvature = 0.0;  // coefficient on (θ - centre)²
  double slope = 0.0;
  double level = 0.0;
  double centre = 0.0;
  bool convex = false;
  bool bracketed = false;  // interior minimum of the fitted parabola within the grid
};

/// Least-squares quadratic over the finite entries of y; needs >= 7 of them.
inline QuadraticFit quadratic_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("quadratic_fit: length mismatch");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(y[i])) idx.push_back(i);
  }
  if (idx.size() < 7) throw std::invalid_argument("quadratic_fit: need at least 7 finite points");
  double centre = 0.0;
  for (auto i : idx) centre += x[i];
  centre /= static_cast<double>(idx.size());
  Mat a(static_cast<Eigen::Index>(idx.size()), 3);
  Vec b(static_cast<Eigen::Index>(idx.size()));
  double span = 0.0;
  for (auto i : idx) span = std::max(span, std::abs(x[i] - centre));
  if (span == 0.0) span = 1.0;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double t = (x[idx[r]] - centre) / span;
    a.row(static_cast<Eigen::Index>(r)) << 1.0, t, t * t;
    b(static_cast<Eigen::Index>(r)) = y[idx[r]];
  }
  const Vec coef = a.colPivHouseholderQr().solve(b);
  QuadraticFit fit;
  fit.centre = centre;
  fit.level = coef(0);
  fit.slope = coef(1) / span;
  fit.curvature = coef(2) / (span * span);
  fit.convex = fit.curvature > 0.0;
  if (fit.convex) {
    const double vertex = centre - fit.slope / (2.0 * fit.curvature);
    fit.bracketed = vertex > x[idx.front()] && vertex < x[idx.back()];
  }
  return fit;
}

struct CurvatureReport {
  std::optional<QuadraticFit> profiled, oracle, loglik;
  double profiled_over_loglik = std::numeric_limits<double>::quiet_NaN();
  double loglik_over_oracle = std::numeric_limits<double>::quiet_NaN();
  double profiled_over_oracle = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;  // some fitted series is not convex
};

inline CurvatureReport curvature_fit(const LossSurface& s) {
  CurvatureReport r;
  auto fit = [&](const std::vector<double>& y) -> std::optional<QuadraticFit> {
    if (y.empty()) return std::nullopt;
    QuadraticFit f = quadratic_fit(s.grid, demeaned(y));
    if (!f.convex) r.flagged = true;
    return f;
  };
  r.profiled = fit(s.profiled);
  r.oracle = fit(s.oracle);
  r.loglik = fit(s.loglik);
  if (r.profiled && r.loglik) r.profiled_over_loglik = r.profiled->curvature / r.loglik->curvature;
  if (r.loglik && r.oracle) r.loglik_over_oracle = r.loglik->curvature / r.oracle->curvature;
  if (r.profiled && r.oracle) r.profiled_over_oracle = r.profiled->curvature / r.oracle->curvature;
  return r;
}

// ----------------------------------------------- population-level quantities

using RowFn = std::function<double(const Eigen::RowVectorXd&)>;

/// P_θ f by adaptive Gauss–Kronrod on ±40 (in units of the covariate sd for
/// conditional models) around the centre of the law.
inline double population_expectation(const GeneratorSpec& spec, const ParamVector& theta, const CovariateLaw& cov,
                                     const RowFn& f, double tol = 1e-10) {
  using boost::math::quadrature::gauss_kronrod;
  if (spec.model == ModelId::logistic_location || spec.model == ModelId::normal_location) {
    const double c = theta.get("theta");
    auto integrand = [&](double x) {
      Eigen::RowVectorXd row(1);
      row << x;
      const LogDensity l = log_density(spec, theta, row);
      return l.supported ? std::exp(l.value) * f(row) : 0.0;
    };
    return gauss_kronrod<double, 61>::integrate(integrand, c - 40.0, c + 40.0, 15, tol);
  }
  if (spec.model == ModelId::binary_choice) {
    auto integrand = [&](double x) {
      const double wx = normal_pdf((x - cov.mean) / cov.sd) / cov.sd;
      Eigen::RowVectorXd one(2), zero(2);
      one << 1.0, x;
      zero << 0.0, x;
      const double p1 = std::exp(log_density(spec, theta, one).value);
      return wx * (p1 * f(one) + (1.0 - p1) * f(zero));
    };
    return gauss_kronrod<double, 61>::integrate(integrand, cov.mean - 40.0 * cov.sd, cov.mean + 40.0 * cov.sd, 15, tol);
  }
  throw std::domain_error("population_expectation: unsupported model");
}

/// Population pair used by the diagnostics: data law P0 and the model at θ0.
struct ModelPair {
  DataLaw truth;
  GeneratorSpec model;
  ParamVector theta0;

  [[nodiscard]] std::string coordinate() const { return theta0.entries().front().name; }

  [[nodiscard]] double log_p0(const Eigen::RowVectorXd& x) const { return log_density(truth.spec, truth.theta, x).value; }

  [[nodiscard]] double log_pt(double t, const Eigen::RowVectorXd& x) const {
    return log_density(model, theta0.with(coordinate(), t), x).value;
  }

  /// log p0(x) - log p_θ0(x), the logit of D_θ0.
  [[nodiscard]] double index(const Eigen::RowVectorXd& x) const { return log_p0(x) - log_pt(t0(), x); }
  [[nodiscard]] double t0() const { return theta0.get(coordinate()); }
  [[nodiscard]] double discriminator(const Eigen::RowVectorXd& x) const { return logistic(index(x)); }
  [[nodiscard]] double log1m_discriminator(const Eigen::RowVectorXd& x) const { return log1m_logistic(index(x)); }

  [[nodiscard]] double expect_model(double t, const RowFn& f) const {
    return population_expectation(model, theta0.with(coordinate(), t), truth.covariates, f);
  }
  [[nodiscard]] double expect_truth(const RowFn& f) const {
    return population_expectation(truth.spec, truth.theta, truth.covariates, f);
  }
};

/// Fourth-order central differences in θ of log p_θ(x): first and second derivative.
inline std::pair<double, double> score_and_hessian(const ModelPair& mp, double t, const Eigen::RowVectorXd& x) {
  const double h = 1e-4 * (std::abs(t) + 1.0);
  const double fm2 = mp.log_pt(t - 2 * h, x), fm1 = mp.log_pt(t - h, x), f0 = mp.log_pt(t, x);
  const double fp1 = mp.log_pt(t + h, x), fp2 = mp.log_pt(t + 2 * h, x);
  const double d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
  const double d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
  return {d1, d2};
}

/// d/dx log p(x) for a one-dimensional outcome, by fourth-order differences.
inline double x_log_derivative(const std::function<double(const Eigen::RowVectorXd&)>& logp, const Eigen::RowVectorXd& x) {
  const double h = 1e-4 * (std::abs(x(0)) + 1.0);
  auto at = [&](double dx) {
    Eigen::RowVectorXd y = x;
    y(0) += dx;
    return logp(y);
  };
  return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
}

/// τ(x) = Ṫ·D_θ0[p'_θ0/p_θ0 - p'_0/p_0](x) for location models (Ṫ = 1); zero
/// for the binary-choice generator, whose map is piecewise constant in θ.
inline double tau_function(const ModelPair& mp, const Eigen::RowVectorXd& x) {
  if (mp.model.model == ModelId::binary_choice) return 0.0;
  const double dt = x_log_derivative([&](const Eigen::RowVectorXd& y) { return mp.log_pt(mp.t0(), y); }, x);
  const double d0 = x_log_derivative([&](const Eigen::RowVectorXd& y) { return mp.log_p0(y); }, x);
  return mp.discriminator(x) * (dt - d0);
}

struct AsymptoticVariance {
  double info_tilde = 0.0;   // curvature of the population loss at the pseudo-true value
  double v = 0.0;            // variance of the scaled loss gradient
  double sandwich = 0.0;     // v / info_tilde²
  double fisher = 0.0;       // model-side expected squared score
  double efficient = 0.0;    // (1 + n/m)/fisher
  double sqrt_n_sd = 0.0;    // √sandwich
};

/// Sandwich variance at θ0 for a scalar parameter. `fixed_half` substitutes
/// D ≡ 1/2 (the correctly specified reduction).
inline AsymptoticVariance asymptotic_variance(const ModelPair& mp, double n_over_m, bool fixed_half = false) {
  const double t0 = mp.t0();
  auto d_of = [&](const Eigen::RowVectorXd& x) { return fixed_half ? 0.5 : mp.discriminator(x); };
  auto l1m_of = [&](const Eigen::RowVectorXd& x) { return fixed_half ? kLogHalf : mp.log1m_discriminator(x); };
  auto tau_of = [&](const Eigen::RowVectorXd& x) { return fixed_half ? 0.0 : tau_function(mp, x); };
  AsymptoticVariance out;
  out.info_tilde = 2.0 * mp.expect_model(t0, [&](const Eigen::RowVectorXd& x) {
    const auto [s, h] = score_and_hessian(mp, t0, x);
    return d_of(x) * s * s + (h + s * s) * l1m_of(x);
  });
  auto dd = [&](const Eigen::RowVectorXd& x) {
    const double s = score_and_hessian(mp, t0, x).first;
    const double d = d_of(x);
    return d * (1.0 - d) * s * s;
  };
  const double tau_terms = mp.expect_model(t0, [&](const Eigen::RowVectorXd& x) {
    const double s = score_and_hessian(mp, t0, x).first;
    const double tau = tau_of(x);
    return 2.0 * d_of(x) * s * tau + tau * tau;
  });
  out.v = 4.0 * (mp.expect_model(t0, dd) + n_over_m * mp.expect_truth(dd) + n_over_m * tau_terms);
  if (!(out.info_tilde > 0.0)) throw std::domain_error("asymptotic_variance: curvature term is not positive (identification failure)");
  out.sandwich = out.v / (out.info_tilde * out.info_tilde);
  out.fisher = mp.expect_model(t0, [&](const Eigen::RowVectorXd& x) {
    const double s = score_and_hessian(mp, t0, x).first;
    return s * s;
  });
  out.efficient = (1.0 + n_over_m) / out.fisher;
  out.sqrt_n_sd = std::sqrt(out.sandwich);
  return out;
}

/// Quasi-MLE sandwich A⁻¹BA⁻¹ at the KL pseudo-true value, all under P0.
inline double qmle_sqrt_n_sd(const ModelPair& mp) {
  const double t0 = mp.t0();
  const double a = -mp.expect_truth([&](const Eigen::RowVectorXd& x) { return score_and_hessian(mp, t0, x).second; });
  const double b = mp.expect_truth([&](const Eigen::RowVectorXd& x) {
    const double s = score_and_hessian(mp, t0, x).first;
    return s * s;
  });
  return std::sqrt(b) / a;
}

/// Population M_θ(D_θ) = P0 log D_θ + P_θ log(1 - D_θ).
inline double population_oracle_loss(const ModelPair& mp, double t) {
  auto index = [&](const Eigen::RowVectorXd& x) { return mp.log_p0(x) - mp.log_pt(t, x); };
  return mp.expect_truth([&](const Eigen::RowVectorXd& x) { return log_logistic(index(x)); }) +
         mp.expect_model(t, [&](const Eigen::RowVectorXd& x) { return log1m_logistic(index(x)); });
}

/// Jensen–Shannon projection of the data law onto the model over [lo, hi].
inline double js_pseudo_true(const ModelPair& mp, double lo, double hi) {
  const auto r = boost::math::tools::brent_find_minima([&](double t) { return population_oracle_loss(mp, t); }, lo, hi, 40);
  return r.first;
}

// ------------------------------------------------- misspecification curves

struct MisspecDiagnostics {
  std::vector<double> h;
  std::vector<double> empirical_curve;  // n·(sample - population) mean of the log(1 - D) increment at θ0 + h/√n
  double tau_slope = 0.0;               // √n·(sample - population) mean of τ
  double tau_population = 0.0;          // population mean of τ
  std::vector<double> smoothness_curve; // √n·change in the simulation error of D·score between θ0 + h/√n and θ0
  std::vector<double> local_curvature;  // h²·info_tilde/4
};

/// Evaluated on m = n synthetic draws from `rng`.
inline MisspecDiagnostics misspec_diagnostics(const ModelPair& mp, Eigen::Index n, const std::vector<double>& h_grid,
                                              const RngStream& rng) {
  const double t0 = mp.t0();
  const double rn = std::sqrt(static_cast<double>(n));
  const LatentDraws latent = draw_latent(mp.model, rng.child("latent"), n);
  std::optional<Dataset> cov;
  if (is_conditional(mp.model)) cov = draw_covariates(mp.truth.covariates, rng.child("covariates"), n);
  auto synth = [&](double t) { return simulate(mp.model, mp.theta0.with(mp.coordinate(), t), latent, cov ? &*cov : nullptr); };
  auto sample_mean_of = [&](const Dataset& d, const RowFn& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) s += f(d.row(i));
    return s / static_cast<double>(d.n());
  };
  const RowFn l1m = [&](const Eigen::RowVectorXd& x) { return mp.log1m_discriminator(x); };
  const RowFn dscore = [&](const Eigen::RowVectorXd& x) { return mp.discriminator(x) * score_and_hessian(mp, t0, x).first; };
  const RowFn tau = [&](const Eigen::RowVectorXd& x) { return tau_function(mp, x); };

  MisspecDiagnostics out;
  out.h = h_grid;
  const Dataset base = synth(t0);
  const double base_l1m_sample = sample_mean_of(base, l1m);
  const double base_l1m_pop = mp.expect_model(t0, l1m);
  const double base_ds_sample = sample_mean_of(base, dscore);
  const double base_ds_pop = mp.expect_model(t0, dscore);
  out.tau_population = mp.expect_model(t0, tau);
  out.tau_slope = rn * (sample_mean_of(base, tau) - out.tau_population);
  const double info = asymptotic_variance(mp, 1.0).info_tilde;
  for (double h : h_grid) {
    const double t = t0 + h / rn;
    if (h == 0.0) {
      out.empirical_curve.push_back(0.0);
      out.smoothness_curve.push_back(0.0);
      out.local_curvature.push_back(0.0);
      continue;
    }
    const Dataset moved = synth(t);
    const double diff_sample = sample_mean_of(moved, l1m) - base_l1m_sample;
    const double diff_pop = mp.expect_model(t, l1m) - base_l1m_pop;
    out.empirical_curve.push_back(static_cast<double>(n) * (diff_sample - diff_pop));
    const double ds = (sample_mean_of(moved, dscore) - mp.expect_model(t, dscore)) - (base_ds_sample - base_ds_pop);
    out.smoothness_curve.push_back(rn * ds);
    out.local_curvature.push_back(h * h * info / 4.0);
  }
  return out;
}

}  // namespace advest
