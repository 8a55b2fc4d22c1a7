// Optimizer, estimators and inference.

#include "advest/estimators.hpp"
#include "advest/inference.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numbers>

using namespace advest;

namespace {

ParamVector scalar(double v, double lo = -10.0, double hi = 10.0) {
  ParamVector p;
  p.add("theta", v, lo, hi);
  return p;
}

GeneratorSpec model_of(ModelId id, ErrorLaw law = ErrorLaw::logistic) {
  GeneratorSpec g;
  g.model = id;
  g.error_law = law;
  return g;
}

EstimationContext location_context(DiscriminatorSpec disc, std::uint64_t seed, Eigen::Index n,
                                   ModelId truth = ModelId::logistic_location, ModelId model = ModelId::logistic_location) {
  EstimationContext ctx;
  ctx.model = model_of(model);
  ctx.theta = scalar(0.0);
  const DataLaw law{model_of(truth), scalar(0.0), {}};
  ctx.real = draw_real(law, RngStream(seed).child("real"), n);
  ctx.latent = draw_latent(ctx.model, RngStream(seed).child("latent"), n);
  ctx.disc = std::move(disc);
  ctx.truth = law;
  return ctx;
}

EstimationContext binary_context(std::uint64_t seed, Eigen::Index n, double theta) {
  EstimationContext ctx;
  ctx.model = model_of(ModelId::binary_choice);
  ctx.theta = scalar(theta, 0.0, 5.0);
  const DataLaw law{model_of(ModelId::binary_choice, ErrorLaw::normal), scalar(1.0), {true, 1.0, 1.0}};
  ctx.real = draw_real(law, RngStream(seed).child("real"), n);
  ctx.latent = draw_latent(ctx.model, RngStream(seed).child("latent"), n);
  ctx.truth = law;
  return ctx;
}

OptimizerConfig tight() {
  OptimizerConfig o;
  o.ftol = 1e-14;
  o.xtol = 1e-12;
  return o;
}

}  // namespace

// --------------------------------------------------------------- optimizer

TEST(Optimizer, FindsQuadraticMinimum) {
  ParamVector p;
  p.add("a", 0.0).add("b", 0.0);
  auto f = [](const ParamVector& t) {
    const double a = t.get("a") - 1.5, b = t.get("b") + 0.5;
    return a * a + 3.0 * b * b + a * b;
  };
  const OptimResult r = minimize(f, p, tight());
  // Stationary point of the quadratic form: (a, b) = (1.5, -0.5).
  EXPECT_NEAR(r.best.get("a"), 1.5, 1e-5);
  EXPECT_NEAR(r.best.get("b"), -0.5, 1e-5);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.improved_on_seed);
  for (const auto& t : r.trace) EXPECT_GE(t.value, r.value);
  EXPECT_LE(r.evaluations, tight().max_evals + 3);
}

TEST(Optimizer, RespectsBoundsThroughTransforms) {
  ParamVector p;
  p.add("s", 1.0, 0.01, 5.0, ParamTransform::log).add("r", 0.0, -0.9, 0.9, ParamTransform::atanh);
  auto f = [](const ParamVector& t) { return std::pow(t.get("s") - 0.2, 2) + std::pow(t.get("r") - 2.0, 2); };
  const OptimResult r = minimize(f, p, tight());
  EXPECT_TRUE(r.best.in_bounds());
  EXPECT_NEAR(r.best.get("s"), 0.2, 1e-4);
  EXPECT_GT(r.best.get("r"), 0.85);
}

TEST(Optimizer, GridSeedBeatsEveryNodeOnStepCriterion) {
  // Piecewise-constant criterion with its lowest step away from the start.
  auto f = [](const ParamVector& t) { return std::floor(4.0 * std::abs(t.get("theta") - 2.3)); };
  OptimizerConfig o;
  o.method = OptMethod::grid_then_nelder_mead;
  o.grid = {{"theta", -3.0, 3.0, 61}};
  const OptimResult r = minimize(f, scalar(-2.0), o);
  for (int k = 0; k < 61; ++k) EXPECT_LE(r.value, f(scalar(-3.0 + 0.1 * k)));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_NEAR(r.best.get("theta"), 2.3, 0.25);
}

TEST(Optimizer, MultistartIsDeterministic) {
  auto f = [](const ParamVector& t) {
    const double x = t.get("theta");
    return std::sin(3.0 * x) + 0.1 * x * x;
  };
  OptimizerConfig o;
  o.starts = 4;
  o.jitter = 1.0;
  const OptimResult a = minimize(f, scalar(2.0), o, RngStream(5));
  const OptimResult b = minimize(f, scalar(2.0), o, RngStream(5));
  EXPECT_EQ(a.best.values(), b.best.values());
  EXPECT_EQ(a.evaluations, b.evaluations);
  const OptimResult single = minimize(f, scalar(2.0), OptimizerConfig{});
  EXPECT_LE(a.value, single.value);
}

TEST(Optimizer, Errors) {
  auto nan = [](const ParamVector&) { return std::nan(""); };
  EXPECT_THROW(minimize(nan, scalar(0.0), OptimizerConfig{}), std::runtime_error);
  OptimizerConfig o;
  o.starts = 0;
  EXPECT_THROW(minimize([](const ParamVector&) { return 0.0; }, scalar(0.0), o), std::invalid_argument);
  EXPECT_THROW(minimize([](const ParamVector&) { return 0.0; }, scalar(0.0, -1, 1).with("theta", 3.0), OptimizerConfig{}),
               std::domain_error);
}

// -------------------------------------------------------------- estimators

TEST(Mle, NormalClosedFormMatchesSimplex) {
  const DataLaw law{model_of(ModelId::logistic_location), scalar(0.3), {}};
  const Dataset data = draw_real(law, RngStream(1), 400);
  const GeneratorSpec normal = model_of(ModelId::normal_location);
  const EstimateReport closed = mle_estimate(normal, scalar(0.0), data, OptimizerConfig{}, EstimatorKind::qmle);
  const EstimateReport iter = mle_estimate_iterative(normal, scalar(0.0), data, tight());
  EXPECT_EQ(closed.method, EstimatorKind::qmle);
  EXPECT_NEAR(closed.theta_hat.get("theta"), data.rows().col(0).mean(), 1e-15);
  EXPECT_NEAR(closed.criterion, iter.criterion, 1e-10);
  EXPECT_NEAR(closed.theta_hat.get("theta"), iter.theta_hat.get("theta"), 1e-6);
}

TEST(Mle, LogisticScoreVanishesAtEstimate) {
  const DataLaw law{model_of(ModelId::logistic_location), scalar(-0.4), {}};
  const Dataset data = draw_real(law, RngStream(2), 500);
  const EstimateReport r = mle_estimate(law.spec, scalar(0.0), data, tight());
  // d/dθ log p(x - θ) = 1 - 2Λ(-(x - θ)) = tanh((x - θ)/2).
  const double th = r.theta_hat.get("theta");
  double score = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) score += std::tanh((data(i, 0) - th) / 2.0);
  EXPECT_LT(std::abs(score / 500.0), 1e-6);
  EXPECT_NEAR(th, -0.4, 0.3);
  // The criterion is half the negative mean log-likelihood.
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) ll += log_density(law.spec, r.theta_hat, data.row(i)).value;
  EXPECT_NEAR(r.criterion, -ll / 1000.0, 1e-12);
}

TEST(Mle, UnsupportedStartIsMovedToFeasibleRegion) {
  GeneratorSpec roy = model_of(ModelId::roy);
  ParamVector th;
  th.add("mu1", 1.8).add("mu2", 2.0).add("gamma1", 0.5).add("gamma2", 0.0);
  th.add("sigma1", 1.0, 1e-3, 10.0, ParamTransform::log).add("sigma2", 1.0, 1e-3, 10.0, ParamTransform::log);
  th.add("rho_s", 0.5, -0.99, 0.99, ParamTransform::atanh).fix("rho_t", 0.0).fix("beta", 0.9);
  const Dataset data = draw_real({roy, th, {}}, RngStream(3), 60);
  const ParamVector bad = th.with("mu1", 4.5);
  EXPECT_FALSE(half_neg_loglik(roy, bad, data).supported);
  OptimizerConfig o;
  o.max_evals = 200;
  const EstimateReport r = mle_estimate(roy, bad, data, o);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(std::isfinite(r.criterion));
}

TEST(Smm, ExactlyIdentifiedMeanMoment) {
  EstimationContext ctx = location_context(DiscriminatorSpec::oracle(), 4, 300);
  FeatureMap mean_only{"mean", {features::power(0, 1, "x")}};
  const EstimateReport r = smm_estimate(mean_only, ctx, Weighting::identity, tight());
  // Location shift: the matched θ is the difference of sample means.
  const double expected = ctx.real.rows().col(0).mean() - ctx.latent.matrix().col(0).mean();
  EXPECT_NEAR(r.theta_hat.get("theta"), expected, 1e-6);
  EXPECT_LT(r.criterion, 1e-12);
  const EstimateReport w = smm_estimate(mean_only, ctx, Weighting::optimal, tight());
  EXPECT_NEAR(w.theta_hat.get("theta"), expected, 1e-6);
}

TEST(Smm, InverseCovarianceMatchesDirectInverse) {
  RngStream r(5);
  Mat g(500, 3);
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double a = r.normal(), b = r.normal(), c = r.normal();
    g.row(i) << a, 0.5 * a + b, 10.0 * c - a;
  }
  const Mat c = g.rowwise() - g.colwise().mean();
  const Mat cov = c.transpose() * c / 499.0;
  EXPECT_LT((detail::inverse_covariance(g) - cov.inverse()).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Probit, FitSolvesTheScoreEquations) {
  RngStream r(6);
  const Eigen::Index n = 2000;
  Vec x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = 1.0 + r.normal();
    y(i) = r.normal() <= 0.3 + 0.8 * x(i) ? 1.0 : 0.0;
  }
  for (int degree : {1, 3, 7, 11}) {
    const ProbitFit fit = fit_probit(x, y, degree);
    EXPECT_TRUE(fit.converged);
    const Mat z = probit_design(x, degree);
    const Vec s = probit_score_rows_at(z, y, fit.index).colwise().mean();
    // Score in the monomial basis, scaled by the column norms.
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      EXPECT_LT(std::abs(s(k)) / std::sqrt(z.col(k).squaredNorm() / static_cast<double>(n)), 1e-6) << degree;
    }
    if (degree <= 3) {
      EXPECT_LT((z * fit.beta - fit.index).lpNorm<Eigen::Infinity>(), 1e-8);
    }
  }
  const ProbitFit one = fit_probit(x, y, 1);
  EXPECT_NEAR(one.beta(0), 0.3, 0.15);
  EXPECT_NEAR(one.beta(1), 0.8, 0.15);
  // Separated samples either fail loudly or converge to a perfect classifier.
  const Vec sep = (x.array() > 1.0).cast<double>();
  try {
    const ProbitFit s = fit_probit(x, sep, 1);
    for (Eigen::Index i = 0; i < n; ++i) EXPECT_EQ(s.index(i) > 0.0, sep(i) == 1.0);
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("separated"), std::string::npos);
  }
}

TEST(IndirectInference, ZeroCriterionWhenSyntheticEqualsReal) {
  EstimationContext ctx = binary_context(7, 500, 1.5);
  // Real data generated from the same latent draws and covariates at θ = 1.5.
  const Dataset cov(Mat(ctx.real.rows().col(1)), {ColumnRole::covariate}, {"x"});
  ctx.real = simulate(ctx.model, ctx.theta, ctx.latent, &cov);
  OptimizerConfig o;
  o.method = OptMethod::grid_then_nelder_mead;
  o.grid = {{"theta", 0.5, 3.0, 51}};
  const EstimateReport r = ii_estimate(1, ctx, Weighting::identity, o);
  EXPECT_LT(r.criterion, 1e-16);
  EXPECT_NEAR(r.theta_hat.get("theta"), 1.5, 0.1);
}

TEST(IndirectInference, CriterionLowerAtPseudoTruth) {
  const EstimationContext ctx = binary_context(8, 5000, 1.744);
  const Vec x = ctx.real.rows().col(1), y = ctx.real.rows().col(0);
  const ProbitFit fit = fit_probit(x, y, 1);
  auto criterion = [&](double th) {
    const Dataset s = ctx.synthesize(ctx.theta.with("theta", th));
    const Mat z = probit_design(s.rows().col(1), 1);
    const Vec g = probit_score_rows(z, s.rows().col(0), fit.beta).colwise().mean();
    return g.squaredNorm();
  };
  EXPECT_LT(criterion(1.744), criterion(1.244));
  EXPECT_LT(criterion(1.744), criterion(2.244));
  EXPECT_THROW(ii_estimate(1, location_context(DiscriminatorSpec::oracle(), 1, 50), Weighting::identity, OptimizerConfig{}),
               std::invalid_argument);
}

TEST(Adversarial, NestingEstimateNearMle) {
  const EstimationContext ctx = location_context(DiscriminatorSpec::nesting(ParametricKind::logistic_location), 9, 600);
  const EstimateReport a = adversarial_estimate(ctx, OptimizerConfig{});
  const EstimateReport m = mle_estimate(ctx.model, ctx.theta, ctx.real, OptimizerConfig{});
  EXPECT_EQ(a.method, EstimatorKind::adversarial);
  EXPECT_NEAR(a.theta_hat.get("theta"), m.theta_hat.get("theta"), 0.15);
  EXPECT_NEAR(a.theta_hat.get("theta"), 0.0, 0.35);
  for (double t : {-0.5, -0.2, 0.0, 0.2, 0.5}) EXPECT_LE(a.criterion, profiled_loss(scalar(t), ctx).value + 1e-12);
}

// ------------------------------------------------------------- parallelism

TEST(Parallel, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(MonteCarlo, SingleReplicationEqualsDirectCall) {
  auto rep = [](std::size_t, const RngStream& s) {
    RngStream r = s;
    Vec v(2);
    v << r.normal(), r.uniform();
    return v;
  };
  const McSummary one = monte_carlo(1, 42, 1, {"a", "b"}, 10, rep);
  const Vec direct = rep(0, replication_stream(42, 0));
  EXPECT_EQ(Vec(one.draws.row(0).transpose()), direct);
  EXPECT_EQ(one.failures, 0);
}

TEST(MonteCarlo, JobsDoNotChangeResults) {
  auto rep = [](std::size_t r, const RngStream& s) {
    if (r == 3) throw std::runtime_error("replication three fails");
    RngStream seeds = s.child("data");
    const EstimationContext ctx =
        location_context(DiscriminatorSpec::nesting(ParametricKind::logistic_location), seeds.next_u64(), 80);
    Vec v(1);
    v << adversarial_estimate(ctx, OptimizerConfig{}).theta_hat.get("theta");
    return v;
  };
  const McSummary a = monte_carlo(8, 7, 1, {"theta"}, 80, rep);
  const McSummary b = monte_carlo(8, 7, 3, {"theta"}, 80, rep);
  EXPECT_TRUE(a.draws.isApprox(b.draws) || (a.draws.array().isNaN() == b.draws.array().isNaN()).all());
  for (int r = 0; r < 8; ++r) {
    if (r == 3) continue;
    EXPECT_EQ(a.draws(r, 0), b.draws(r, 0));
  }
  EXPECT_EQ(a.failures, 1);
  EXPECT_FALSE(a.ok[3]);
  ASSERT_EQ(a.failure_log.size(), 1u);
  EXPECT_NE(a.failure_log[0].find("replication three fails"), std::string::npos);
  EXPECT_EQ(a.mean(0), b.mean(0));
  EXPECT_EQ(a.sd(0), b.sd(0));
}

TEST(MonteCarlo, SummaryStatistics) {
  Mat d(5, 1);
  d << 1.0, 2.0, 4.0, 7.0, 100.0;
  const McSummary s = summarize({"t"}, d, {true, true, true, true, false}, 25);
  EXPECT_EQ(s.failures, 1);
  EXPECT_DOUBLE_EQ(s.mean(0), 3.5);
  const double sd = std::sqrt(((1 - 3.5) * (1 - 3.5) + 1.5 * 1.5 + 0.25 + 3.5 * 3.5) / 3.0);
  EXPECT_NEAR(s.sd(0), sd, 1e-14);
  EXPECT_NEAR(s.sqrt_n_sd(0), 5.0 * sd, 1e-13);
  EXPECT_NEAR(s.mean_se(0), sd / 2.0, 1e-14);
  long total = 0;
  for (long c : s.histograms[0].counts) total += c;
  EXPECT_EQ(total, 4);
  EXPECT_EQ(s.column(0).size(), 4u);
}

// --------------------------------------------------------------- bootstrap

TEST(Bootstrap, DeterministicAndJobInvariant) {
  const EstimationContext ctx = location_context(DiscriminatorSpec::nesting(ParametricKind::logistic_location), 10, 120);
  auto est = [](const EstimationContext& c, const RngStream&) {
    return adversarial_estimate(c, OptimizerConfig{}).theta_hat.values();
  };
  const BootstrapResult a = bootstrap_se(ctx, 2, 99, 1, est);
  const BootstrapResult b = bootstrap_se(ctx, 2, 99, 1, est);
  const BootstrapResult c = bootstrap_se(ctx, 4, 99, 2, est);
  const BootstrapResult d = bootstrap_se(ctx, 4, 99, 1, est);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.se, b.se);
  EXPECT_EQ(c.draws, d.draws);
  EXPECT_EQ(Mat(c.draws.topRows(2)), a.draws);
  EXPECT_GT(a.se(0), 0.0);
  EXPECT_THROW(bootstrap_se(ctx, 1, 99, 1, est), std::invalid_argument);
}

TEST(Bootstrap, ResamplesBothSamples) {
  const EstimationContext ctx = location_context(DiscriminatorSpec::oracle(), 11, 50);
  const EstimationContext b = bootstrap_context(ctx, RngStream(1));
  EXPECT_EQ(b.real.n(), ctx.real.n());
  EXPECT_EQ(b.latent.m(), ctx.latent.m());
  EXPECT_FALSE(b.real == ctx.real);
  EXPECT_NE(b.latent.matrix(), ctx.latent.matrix());
  for (Eigen::Index i = 0; i < b.real.n(); ++i) {
    EXPECT_TRUE((ctx.real.rows().col(0).array() == b.real(i, 0)).any());
  }
}

TEST(Bootstrap, TooManyFailuresIsAnError) {
  const EstimationContext ctx = location_context(DiscriminatorSpec::oracle(), 12, 30);
  std::atomic<int> calls{0};
  auto flaky = [&](const EstimationContext& c, const RngStream&) -> Vec {
    if (calls++ % 2 == 0) throw std::runtime_error("no convergence");
    return c.theta.values();
  };
  EXPECT_THROW(bootstrap_se(ctx, 10, 1, 1, flaky), std::runtime_error);
  int k = 0;
  auto rare = [&](const EstimationContext& c, const RngStream&) -> Vec {
    if (k++ == 0) throw std::runtime_error("no convergence");
    return Vec::Constant(1, c.real.rows().mean());
  };
  const BootstrapResult ok = bootstrap_se(ctx, 10, 1, 1, rare);
  EXPECT_EQ(ok.failures, 1);
  EXPECT_TRUE(std::isfinite(ok.se(0)));
}

// ---------------------------------------------------------------- surfaces

TEST(Surface, ArgminNearEstimate) {
  const EstimationContext ctx = location_context(DiscriminatorSpec::nesting(ParametricKind::logistic_location), 13, 400);
  const EstimateReport est = adversarial_estimate(ctx, OptimizerConfig{});
  std::vector<double> grid;
  for (int k = 0; k <= 40; ++k) grid.push_back(-1.0 + 0.05 * k);
  const LossSurface s = surface_scan(ctx, "theta", grid, {}, 2);
  ASSERT_EQ(s.profiled.size(), grid.size());
  ASSERT_EQ(s.oracle.size(), grid.size());
  ASSERT_EQ(s.loglik.size(), grid.size());
  const auto best = std::min_element(s.profiled.begin(), s.profiled.end()) - s.profiled.begin();
  EXPECT_LE(std::abs(grid[static_cast<std::size_t>(best)] - est.theta_hat.get("theta")), 0.05 + 1e-12);
  const EstimateReport mle = mle_estimate(ctx.model, ctx.theta, ctx.real, OptimizerConfig{});
  const auto lbest = std::min_element(s.loglik.begin(), s.loglik.end()) - s.loglik.begin();
  EXPECT_LE(std::abs(grid[static_cast<std::size_t>(lbest)] - mle.theta_hat.get("theta")), 0.05 + 1e-12);
  for (bool sup : s.supported) EXPECT_TRUE(sup);
  EXPECT_THROW(surface_scan(ctx, "theta", {0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(surface_scan(ctx, "nope", {0.0, 1.0}), std::out_of_range);
  const LossSurface only = surface_scan(ctx, "theta", {0.0, 0.1}, {true, false, false});
  EXPECT_TRUE(only.oracle.empty());
  EXPECT_TRUE(only.loglik.empty());
  EXPECT_EQ(only.profiled.size(), 2u);
}

TEST(Surface, QuadraticFitRecoversExactParabola) {
  std::vector<double> x, y;
  for (int k = 0; k < 9; ++k) {
    x.push_back(0.5 + 0.25 * k);
    y.push_back(3.0 * std::pow(x.back() - 1.0, 2) + 2.0 * x.back() + 5.0);
  }
  const QuadraticFit f = quadratic_fit(x, y);
  const double c = 1.5;
  EXPECT_NEAR(f.centre, c, 1e-15);
  EXPECT_NEAR(f.curvature, 3.0, 1e-10);
  EXPECT_NEAR(f.slope, 6.0 * (c - 1.0) + 2.0, 1e-10);
  EXPECT_NEAR(f.level, 3.0 * (c - 1.0) * (c - 1.0) + 2.0 * c + 5.0, 1e-10);
  EXPECT_TRUE(f.convex);
  EXPECT_TRUE(f.bracketed);
  y[2] = kInf;
  y[3] = std::nan("");
  EXPECT_NEAR(quadratic_fit(x, y).curvature, 3.0, 1e-10);
  y[4] = kInf;
  EXPECT_THROW(quadratic_fit(x, y), std::invalid_argument);
}

// --------------------------------------------------- population diagnostics

TEST(Population, ExpectationsOfKnownMoments) {
  const GeneratorSpec g = model_of(ModelId::logistic_location);
  auto x1 = [](const Eigen::RowVectorXd& r) { return r(0); };
  auto x2 = [](const Eigen::RowVectorXd& r) { return r(0) * r(0); };
  EXPECT_NEAR(population_expectation(g, scalar(0.7), {}, x1), 0.7, 1e-9);
  EXPECT_NEAR(population_expectation(g, scalar(0.7), {}, x2), 0.49 + std::numbers::pi * std::numbers::pi / 3.0, 1e-8);
  const GeneratorSpec b = model_of(ModelId::binary_choice, ErrorLaw::normal);
  // P(y = 1) with x ~ N(1, 1) and a unit probit slope: Φ(1/√2).
  EXPECT_NEAR(population_expectation(b, scalar(1.0), {true, 1.0, 1.0}, x1), normal_cdf(1.0 / std::sqrt(2.0)), 1e-8);
}

TEST(Population, CorrectSpecificationReducesToEfficientVariance) {
  const ModelPair mp{{model_of(ModelId::logistic_location), scalar(0.0), {}}, model_of(ModelId::logistic_location), scalar(0.0)};
  const AsymptoticVariance half = asymptotic_variance(mp, 1.0, true);
  const AsymptoticVariance full = asymptotic_variance(mp, 1.0);
  EXPECT_NEAR(half.fisher, 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(half.sandwich, half.efficient, 1e-6);
  EXPECT_NEAR(full.sandwich, half.sandwich, 1e-6);
  EXPECT_NEAR(full.sqrt_n_sd, std::sqrt(6.0), 1e-5);
  const AsymptoticVariance tenfold = asymptotic_variance(mp, 0.1, true);
  EXPECT_NEAR(tenfold.sqrt_n_sd, std::sqrt(3.0 * 1.1), 1e-5);
  EXPECT_NEAR(population_oracle_loss(mp, 0.0), 2.0 * std::log(0.5), 1e-9);
  EXPECT_GT(population_oracle_loss(mp, 0.5), 2.0 * std::log(0.5));
}

TEST(Population, QuasiLikelihoodSandwichForNormalModel) {
  // The normal QMLE is the sample mean: √n sd equals the logistic sd π/√3.
  const ModelPair mp{{model_of(ModelId::logistic_location), scalar(0.0), {}}, model_of(ModelId::normal_location), scalar(0.0)};
  EXPECT_NEAR(qmle_sqrt_n_sd(mp), std::numbers::pi / std::sqrt(3.0), 1e-5);
  EXPECT_NEAR(js_pseudo_true(mp, -2.0, 2.0), 0.0, 1e-6);
}

TEST(Population, BinaryProjectionMatchesIndependentQuadrature) {
  const ModelPair mp{{model_of(ModelId::binary_choice, ErrorLaw::normal), scalar(1.0), {true, 1.0, 1.0}},
                     model_of(ModelId::binary_choice), scalar(1.744)};
  // Trapezoid over the covariate law and golden-section search, by hand.
  auto loss = [](double t) {
    double total = 0.0;
    const double h = 1e-3;
    for (double c = -11.0; c <= 13.0; c += h) {
      const double w = normal_pdf(c - 1.0) * h;
      const double p0 = normal_cdf(c), pt = logistic(t * c);
      const double d1 = p0 / (p0 + pt), d0 = (1.0 - p0) / ((1.0 - p0) + (1.0 - pt));
      double v = 0.0;
      if (p0 > 0) v += p0 * std::log(d1);
      if (p0 < 1) v += (1.0 - p0) * std::log(d0);
      if (pt > 0) v += pt * std::log(1.0 - d1);
      if (pt < 1) v += (1.0 - pt) * std::log(1.0 - d0);
      total += w * v;
    }
    return total;
  };
  double a = 1.0, b = 2.5;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  while (b - a > 1e-7) {
    const double c = b - phi * (b - a), d = a + phi * (b - a);
    if (loss(c) < loss(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  const double independent = 0.5 * (a + b);
  EXPECT_NEAR(js_pseudo_true(mp, 1.0, 2.5), independent, 1e-4);
  EXPECT_NEAR(population_oracle_loss(mp, 1.3), loss(1.3), 1e-6);
}

TEST(Population, MisspecDiagnosticsForBinaryModel) {
  const ModelPair mp{{model_of(ModelId::binary_choice, ErrorLaw::normal), scalar(1.0), {true, 1.0, 1.0}},
                     model_of(ModelId::binary_choice), scalar(1.744)};
  const MisspecDiagnostics d = misspec_diagnostics(mp, 2000, {-2.0, 0.0, 2.0}, RngStream(3));
  EXPECT_EQ(d.tau_population, 0.0);
  EXPECT_EQ(d.tau_slope, 0.0);
  EXPECT_EQ(d.empirical_curve[1], 0.0);
  EXPECT_EQ(d.smoothness_curve[1], 0.0);
  EXPECT_GT(d.local_curvature[0], 0.0);
  EXPECT_DOUBLE_EQ(d.local_curvature[0], d.local_curvature[2]);
}

TEST(Population, NormalMisspecLikelihoodCurvesMoreThanOracle) {
  const EstimationContext ctx = location_context(DiscriminatorSpec::oracle(), 14, 3000, ModelId::logistic_location,
                                                 ModelId::normal_location);
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(-0.5 + 0.05 * k);
  const CurvatureReport c = curvature_fit(surface_scan(ctx, "theta", grid, {false, true, true}));
  ASSERT_TRUE(c.loglik && c.oracle);
  EXPECT_GT(c.loglik_over_oracle, 1.5);
}
