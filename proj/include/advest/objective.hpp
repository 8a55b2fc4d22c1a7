#pragma once

#include "advest/dataset.hpp"
#include "advest/discriminators.hpp"
#include "advest/generators.hpp"
#include "advest/math.hpp"
#include "advest/params.hpp"
#include "advest/rng.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace advest {

inline constexpr double kDefaultClamp = 1e-12;

struct LossValue {
  double value = 0.0;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  long clamp_events = 0;
};

/// Loss from discriminator indices with D clamped into [eps, 1-eps].
inline LossValue cross_entropy_loss(const Vec& g_real, const Vec& g_synth, double eps = kDefaultClamp) {
  if (g_real.size() == 0 || g_synth.size() == 0) throw std::invalid_argument("cross_entropy_loss: empty sample");
  const double cap = logit(1.0 - eps);
  LossValue out{0.0, g_real.size(), g_synth.size(), 0};
  auto clamp = [&](double g) {
    if (std::isnan(g)) throw std::domain_error("cross_entropy_loss: NaN discriminator index");
    if (g > cap) { ++out.clamp_events; return cap; }
    if (g < -cap) { ++out.clamp_events; return -cap; }
    return g;
  };
  double a = 0.0, b = 0.0;
  for (Eigen::Index i = 0; i < g_real.size(); ++i) a += log_logistic(clamp(g_real(i)));
  for (Eigen::Index i = 0; i < g_synth.size(); ++i) b += log1m_logistic(clamp(g_synth(i)));
  out.value = a / static_cast<double>(out.n) + b / static_cast<double>(out.m);
  return out;
}

/// Loss of an arbitrary probability-valued discriminator.
inline LossValue cross_entropy_loss(const std::function<double(const Eigen::RowVectorXd&)>& d, const Dataset& real,
                                    const Dataset& synth, double eps = kDefaultClamp) {
  if (real.empty() || synth.empty()) throw std::invalid_argument("cross_entropy_loss: empty sample");
  LossValue out{0.0, real.n(), synth.n(), 0};
  auto clamp = [&](double p) {
    if (std::isnan(p)) throw std::domain_error("cross_entropy_loss: NaN discriminator output");
    if (p < eps) { ++out.clamp_events; return eps; }
    if (p > 1.0 - eps) { ++out.clamp_events; return 1.0 - eps; }
    return p;
  };
  double a = 0.0, b = 0.0;
  for (Eigen::Index i = 0; i < real.n(); ++i) a += std::log(clamp(d(real.row(i))));
  for (Eigen::Index i = 0; i < synth.n(); ++i) b += std::log1p(-clamp(d(synth.row(i))));
  out.value = a / static_cast<double>(real.n()) + b / static_cast<double>(synth.n());
  return out;
}

// ------------------------------------------------------------------ training

enum class TrainOptimizer { newton_irls, bfgs, full_batch_adam };

inline std::string to_string(TrainOptimizer o) {
  switch (o) {
    case TrainOptimizer::newton_irls: return "newton_irls";
    case TrainOptimizer::bfgs: return "bfgs";
    case TrainOptimizer::full_batch_adam: return "full_batch_adam";
  }
  return "?";
}

inline TrainOptimizer train_optimizer_from_string(const std::string& s) {
  if (s == "newton_irls") return TrainOptimizer::newton_irls;
  if (s == "bfgs") return TrainOptimizer::bfgs;
  if (s == "full_batch_adam") return TrainOptimizer::full_batch_adam;
  throw std::invalid_argument("unknown train optimizer: " + s);
}

struct TrainConfig {
  /// Optimizer for the network; logistic and parametric families always use Newton.
  TrainOptimizer optimizer = TrainOptimizer::bfgs;
  int newton_iters = 100;
  double tol = 1e-9;
  int mlp_iters = 400;
  double mlp_tol = 1e-7;
  double lr = 0.05;
  double ridge = 1e-8;
  /// L2 penalty (per observation) on network weights, biases excluded.
  double mlp_decay = 0.01;
  double clamp = kDefaultClamp;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  void validate() const {
    if (!(tol > 0.0) || !(mlp_tol > 0.0)) throw std::invalid_argument("TrainConfig: tolerances must be > 0");
    if (newton_iters < 1 || mlp_iters < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (!(mlp_decay >= 0.0)) throw std::invalid_argument("TrainConfig: mlp_decay must be >= 0");
    if (!(ridge >= 0.0)) throw std::invalid_argument("TrainConfig: ridge must be >= 0");
    if (!(clamp > 0.0 && clamp < 0.5)) throw std::invalid_argument("TrainConfig: clamp must lie in (0, 0.5)");
  }
};

/// Count of training runs that hit their iteration cap without meeting tolerance.
inline std::atomic<long>& nonconvergence_counter() {
  static std::atomic<long> count{0};
  return count;
}

namespace detail {

/// Damped Newton ascent on a concave-ish objective with ridge penalty
/// -ridge/2 |λ|². `eval` fills value, gradient and Hessian of the unpenalized loss.
template <typename Eval>
DiscriminatorParams newton_ascent(Vec w, const TrainConfig& cfg, Eval&& eval) {
  DiscriminatorParams out;
  const Eigen::Index k = w.size();
  double value = 0.0;
  Vec grad(k);
  Mat hess(k, k);
  auto penalized = [&](const Vec& x, double& v, Vec& g, Mat& h, bool want_hess) {
    eval(x, v, g, h, want_hess);
    v -= 0.5 * cfg.ridge * x.squaredNorm();
    g -= cfg.ridge * x;
    if (want_hess) h.diagonal().array() -= cfg.ridge;
  };
  penalized(w, value, grad, hess, true);
  out.trace.push_back(value);
  bool converged = false;
  int it = 0;
  for (; it < cfg.newton_iters; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() <= cfg.tol) {
      converged = true;
      break;
    }
    Mat neg = -hess;
    Eigen::LLT<Mat> llt(neg);
    Vec step;
    if (llt.info() == Eigen::Success) {
      step = llt.solve(grad);
    } else {
      // Indefinite curvature: shift the spectrum so the step still ascends.
      Eigen::SelfAdjointEigenSolver<Mat> es(neg);
      const double shift = std::max(0.0, -es.eigenvalues().minCoeff()) + 1e-6 + cfg.ridge;
      neg.diagonal().array() += shift;
      step = neg.ldlt().solve(grad);
    }
    const double slope = grad.dot(step);
    double t = 1.0;
    Vec trial;
    double trial_value = 0.0;
    Vec trial_grad(k);
    Mat trial_hess(k, k);
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      trial = w + t * step;
      eval(trial, trial_value, trial_grad, trial_hess, false);
      trial_value -= 0.5 * cfg.ridge * trial.squaredNorm();
      if (std::isfinite(trial_value) && trial_value >= value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      if (std::isfinite(trial_value) && t * step.lpNorm<Eigen::Infinity>() < 1e-14) break;
    }
    if (!accepted) {
      converged = grad.lpNorm<Eigen::Infinity>() <= std::max(cfg.tol, 1e-7);
      break;
    }
    w = trial;
    penalized(w, value, grad, hess, true);
    out.trace.push_back(value);
  }
  if (!converged && grad.lpNorm<Eigen::Infinity>() <= cfg.tol) converged = true;
  out.weights = std::move(w);
  out.converged = converged;
  out.iterations = it;
  out.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
  if (!converged) ++nonconvergence_counter();
  return out;
}

inline DiscriminatorParams train_logistic(const DiscriminatorSpec& spec, const Dataset& real, const Dataset& synth,
                                          const TrainConfig& cfg) {
  const Mat fr_raw = spec.features.eval_all(real);
  const Mat fs_raw = spec.features.eval_all(synth);
  Standardizer standardizer;
  if (spec.standardize) {
    standardizer = Standardizer::fit(fr_raw, spec.features.has_constant(), constant_mask(spec.features));
  }
  const Mat fr = standardizer.apply(fr_raw);
  const Mat fs = standardizer.apply(fs_raw);
  const double n = static_cast<double>(fr.rows()), m = static_cast<double>(fs.rows());
  auto eval = [&](const Vec& w, double& v, Vec& g, Mat& h, bool want_hess) {
    const Vec ir = fr * w;
    const Vec is = fs * w;
    v = loss_from_indices(ir, is);
    Vec cr(ir.size()), cs(is.size()), wr(ir.size()), ws(is.size());
    for (Eigen::Index i = 0; i < ir.size(); ++i) {
      const double p = logistic(ir(i));
      cr(i) = (1.0 - p) / n;
      wr(i) = p * (1.0 - p) / n;
    }
    for (Eigen::Index i = 0; i < is.size(); ++i) {
      const double p = logistic(is(i));
      cs(i) = -p / m;
      ws(i) = p * (1.0 - p) / m;
    }
    g = fr.transpose() * cr + fs.transpose() * cs;
    if (want_hess) {
      h = -(fr.transpose() * wr.asDiagonal() * fr) - (fs.transpose() * ws.asDiagonal() * fs);
    }
  };
  DiscriminatorParams out = newton_ascent(Vec::Zero(fr.cols()), cfg, eval);
  out.family = DiscFamily::logistic;
  out.standardizer = std::move(standardizer);
  return out;
}

inline DiscriminatorParams train_parametric(const DiscriminatorSpec& spec, const Dataset& real, const Dataset& synth,
                                            const TrainConfig& cfg) {
  const double n = static_cast<double>(real.n()), m = static_cast<double>(synth.n());
  const Eigen::Index k = parametric_dim(spec.parametric);
  auto eval = [&](const Vec& w, double& v, Vec& g, Mat& h, bool want_hess) {
    v = 0.0;
    g = Vec::Zero(k);
    if (want_hess) h = Mat::Zero(k, k);
    auto accumulate = [&](const Dataset& data, bool is_real) {
      const double denom = is_real ? n : m;
      double part = 0.0;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        const IndexDerivs d = parametric_derivs(spec.parametric, w, data.row(i));
        const double p = logistic(d.g);
        part += is_real ? log_logistic(d.g) : log1m_logistic(d.g);
        const double c = (is_real ? 1.0 - p : -p) / denom;
        g += c * d.grad;
        if (want_hess) {
          h.noalias() -= (p * (1.0 - p) / denom) * d.grad * d.grad.transpose();
          h += c * d.hess;
        }
      }
      v += part / denom;
    };
    accumulate(real, true);
    accumulate(synth, false);
  };
  DiscriminatorParams out = newton_ascent(parametric_neutral(spec.parametric), cfg, eval);
  out.family = DiscFamily::parametric;
  return out;
}

inline DiscriminatorParams train_mlp(const DiscriminatorSpec& spec, const Dataset& real, const Dataset& synth,
                                     const TrainConfig& cfg, const RngStream& init_rng) {
  Standardizer standardizer;
  if (spec.standardize) standardizer = mlp_standardizer(real);
  const Mat zr = mlp_inputs(real, standardizer);
  const Mat zs = mlp_inputs(synth, standardizer);
  const Vec decay_mask = mlp_weight_mask(spec.mlp, static_cast<int>(real.d())) * cfg.mlp_decay;
  auto loss_grad = [&](const Vec& w, Vec* grad) {
    const auto tr = mlp_tape(spec.mlp, w, zr);
    const auto ts = mlp_tape(spec.mlp, w, zs);
    const Vec gr = tr.back().col(0);
    const Vec gs = ts.back().col(0);
    const double v = loss_from_indices(gr, gs) - 0.5 * w.dot(decay_mask.cwiseProduct(w));
    if (grad != nullptr) {
      const auto [cr, cs] = loss_index_slopes(gr, gs);
      *grad = mlp_backprop_tape(spec.mlp, w, tr, cr) + mlp_backprop_tape(spec.mlp, w, ts, cs) - decay_mask.cwiseProduct(w);
    }
    return v;
  };

  DiscriminatorParams out;
  out.family = DiscFamily::mlp;
  out.standardizer = standardizer;
  Vec w = mlp_init(spec.mlp, static_cast<int>(real.d()), init_rng);
  Vec grad;
  double value = loss_grad(w, &grad);
  out.trace.push_back(value);
  int it = 0;
  bool converged = false;

  if (cfg.optimizer == TrainOptimizer::full_batch_adam) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double lr = cfg.lr;
    Vec mom = Vec::Zero(w.size()), var = Vec::Zero(w.size());
    int accepted_steps = 0;
    for (; it < cfg.mlp_iters; ++it) {
      if (grad.lpNorm<Eigen::Infinity>() <= cfg.mlp_tol) {
        converged = true;
        break;
      }
      const Vec mom_next = b1 * mom + (1.0 - b1) * grad;
      const Vec var_next = b2 * var + (1.0 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(b1, accepted_steps + 1);
      const double c2 = 1.0 - std::pow(b2, accepted_steps + 1);
      const Vec step = lr * (mom_next / c1).array() / ((var_next / c2).array().sqrt() + eps);
      const Vec trial = w + step;  // ascent
      Vec trial_grad;
      const double trial_value = loss_grad(trial, &trial_grad);
      if (std::isfinite(trial_value) && trial_value >= value) {
        w = trial;
        value = trial_value;
        grad = std::move(trial_grad);
        mom = mom_next;
        var = var_next;
        ++accepted_steps;
      } else {
        // Restart the moment estimates so the next proposal follows the current gradient.
        lr *= 0.5;
        mom.setZero();
        var.setZero();
        accepted_steps = 0;
        if (lr < 1e-12) break;
      }
      out.trace.push_back(value);
    }
    converged = converged || it == cfg.mlp_iters;  // fixed budget counts as completion
  } else {
    // BFGS on -loss with an Armijo backtracking line search.
    const Eigen::Index k = w.size();
    Mat hinv = Mat::Identity(k, k);
    for (; it < cfg.mlp_iters; ++it) {
      if (grad.lpNorm<Eigen::Infinity>() <= cfg.mlp_tol) {
        converged = true;
        break;
      }
      Vec dir = hinv * grad;
      double slope = grad.dot(dir);
      if (!(slope > 0.0)) {
        hinv.setIdentity();
        dir = grad;
        slope = grad.squaredNorm();
      }
      double t = 1.0;
      Vec trial, trial_grad;
      double trial_value = -kInf;
      bool accepted = false;
      for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
        trial = w + t * dir;
        trial_value = loss_grad(trial, &trial_grad);
        if (std::isfinite(trial_value) && trial_value >= value + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        converged = grad.lpNorm<Eigen::Infinity>() <= 1e-5;
        break;
      }
      const Vec s = trial - w;
      const Vec y = grad - trial_grad;  // gradient of -loss: y = ∇f(new) - ∇f(old)
      const double sy = s.dot(y);
      if (sy > 1e-12) {
        const double rho = 1.0 / sy;
        const Vec hy = hinv * y;
        hinv += (rho * rho * y.dot(hy) + rho) * s * s.transpose() - rho * (hy * s.transpose() + s * hy.transpose());
      }
      w = std::move(trial);
      grad = std::move(trial_grad);
      const double prev = value;
      value = trial_value;
      out.trace.push_back(value);
      if (std::abs(value - prev) <= 1e-15 * std::max(1.0, std::abs(value))) {
        converged = true;
        ++it;
        break;
      }
    }
    if (!converged) ++nonconvergence_counter();
  }
  out.weights = std::move(w);
  out.converged = converged;
  out.iterations = it;
  out.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace detail

/// Inner maximization. The oracle family has no weights and returns an empty,
/// frozen parameter set. `init_rng` seeds the network initialization and is
/// consumed by label, so every call starts from identical weights.
inline DiscriminatorParams train_discriminator(const DiscriminatorSpec& spec, const Dataset& real,
                                               const Dataset& synth, const TrainConfig& cfg,
                                               const RngStream& init_rng = RngStream(0)) {
  cfg.validate();
  if (real.empty() || synth.empty()) throw std::invalid_argument("train_discriminator: empty sample");
  DiscriminatorParams out;
  switch (spec.family) {
    case DiscFamily::oracle: out.family = DiscFamily::oracle; break;
    case DiscFamily::logistic: out = detail::train_logistic(spec, real, synth, cfg); break;
    case DiscFamily::parametric: out = detail::train_parametric(spec, real, synth, cfg); break;
    case DiscFamily::mlp: out = detail::train_mlp(spec, real, synth, cfg, init_rng); break;
  }
  out.frozen = true;
  return out;
}

// ----------------------------------------------------------- profiled loss

/// Everything held fixed while θ varies.
struct EstimationContext {
  GeneratorSpec model;
  ParamVector theta;  // template: names, bounds, fixed constants, start values
  Dataset real;
  LatentDraws latent{Mat::Zero(1, 1), {}};
  DiscriminatorSpec disc;
  TrainConfig train;
  RngStream init_rng{0};
  /// Law of the real data; required by the oracle family and diagnostics.
  std::optional<DataLaw> truth;

  /// Covariates recycled into the synthetic sample (conditional models).
  [[nodiscard]] std::optional<Dataset> synthetic_covariates() const {
    if (!is_conditional(model)) return std::nullopt;
    Dataset x = covariate_columns(real);
    if (x.n() != latent.m()) throw std::invalid_argument("context: recycled covariates need m = n");
    return x;
  }

  [[nodiscard]] Dataset synthesize(const ParamVector& th) const {
    const auto x = synthetic_covariates();
    return simulate(model, th, latent, x ? &*x : nullptr);
  }

  [[nodiscard]] OracleModel oracle_model(const ParamVector& th) const {
    if (!truth) throw std::invalid_argument("context: oracle needs the real-data law");
    return {&*truth, model, th};
  }
};

struct ProfiledResult {
  LossValue loss;
  DiscriminatorParams params;
};

/// θ ↦ M_θ(D̂_θ): simulate on the fixed draws, train, evaluate.
inline ProfiledResult profiled_loss_full(const ParamVector& theta, const EstimationContext& ctx) {
  const Dataset synth = ctx.synthesize(theta);
  ProfiledResult out;
  out.params = train_discriminator(ctx.disc, ctx.real, synth, ctx.train, ctx.init_rng);
  std::optional<OracleModel> om;
  if (ctx.disc.family == DiscFamily::oracle) om = ctx.oracle_model(theta);
  const Vec gr = discriminator_indices(ctx.disc, out.params, ctx.real, om ? &*om : nullptr);
  const Vec gs = discriminator_indices(ctx.disc, out.params, synth, om ? &*om : nullptr);
  out.loss = cross_entropy_loss(gr, gs, ctx.train.clamp);
  return out;
}

inline LossValue profiled_loss(const ParamVector& theta, const EstimationContext& ctx) {
  return profiled_loss_full(theta, ctx).loss;
}

/// Sample loss of the oracle discriminator at θ on the context's draws.
inline LossValue oracle_loss(const ParamVector& theta, const EstimationContext& ctx) {
  const Dataset synth = ctx.synthesize(theta);
  const OracleModel om = ctx.oracle_model(theta);
  const DiscriminatorParams none;
  const DiscriminatorSpec oracle = DiscriminatorSpec::oracle();
  return cross_entropy_loss(discriminator_indices(oracle, none, ctx.real, &om),
                            discriminator_indices(oracle, none, synth, &om), ctx.train.clamp);
}

/// Memoizing wrapper around profiled_loss_full keyed by the free θ values.
class ProfiledLoss {
 public:
  explicit ProfiledLoss(const EstimationContext& ctx) : ctx_(ctx) {}

  ProfiledResult evaluate(const ParamVector& theta) {
    const Vec v = theta.values();
    std::vector<double> key(v.data(), v.data() + v.size());
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    ProfiledResult r = profiled_loss_full(theta, ctx_);
    std::lock_guard lock(mu_);
    cache_[key] = r;
    return r;
  }

  double operator()(const ParamVector& theta) { return evaluate(theta).loss.value; }

  [[nodiscard]] std::size_t cache_size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  const EstimationContext& ctx_;
  mutable std::mutex mu_;
  std::map<std::vector<double>, ProfiledResult> cache_;
};

}  // namespace advest
