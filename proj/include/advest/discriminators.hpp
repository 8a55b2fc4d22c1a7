#pragma once

// Classification functions D(x) = Λ(g(x)). Every family is represented by its
// index g so that losses can be evaluated in log space.

#include "advest/dataset.hpp"
#include "advest/generators.hpp"
#include "advest/math.hpp"
#include "advest/params.hpp"
#include "advest/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace advest {

// -------------------------------------------------------------- feature maps

/// One declarative feature. Column indices refer to dataset columns.
struct Feature {
  enum class Kind {
    constant,       // 1
    monomial,       // x_a^p * x_b^q  (b < 0: x_a^p only)
    softplus_neg,   // log(1 + e^{-scale * x_a})
    log_cdf_signed, // log Φ((2 x_b - 1) x_a), linear in x_b between 0 and 1
    positive_part,  // max(x_a, 0)
  };
  Kind kind = Kind::constant;
  int a = -1;
  int b = -1;
  int p = 1;
  int q = 1;
  double scale = 1.0;
  std::string name;

  friend bool operator==(const Feature&, const Feature&) = default;

  [[nodiscard]] double eval(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    switch (kind) {
      case Kind::constant: return 1.0;
      case Kind::monomial: {
        double v = std::pow(x(a), p);
        if (b >= 0) v *= std::pow(x(b), q);
        return v;
      }
      case Kind::softplus_neg: return softplus_neg(scale * x(a));
      case Kind::log_cdf_signed: {
        const double y = x(b);
        return y * log_normal_cdf(x(a)) + (1.0 - y) * log_normal_cdf(-x(a));
      }
      case Kind::positive_part: return std::max(x(a), 0.0);
    }
    return 0.0;
  }
};

struct FeatureMap {
  std::string name;
  std::vector<Feature> features;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(features.size()); }

  [[nodiscard]] bool has_constant() const {
    for (const auto& f : features) {
      if (f.kind == Feature::Kind::constant) return true;
    }
    return false;
  }

  [[nodiscard]] int max_column() const {
    int c = -1;
    for (const auto& f : features) c = std::max({c, f.a, f.b});
    return c;
  }

  [[nodiscard]] Vec eval(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    Vec out(size());
    for (Eigen::Index k = 0; k < size(); ++k) out(k) = features[static_cast<std::size_t>(k)].eval(x);
    return out;
  }

  /// N×p feature matrix; throws if any entry is non-finite.
  [[nodiscard]] Mat eval_all(const Dataset& data) const {
    if (max_column() >= data.d()) throw std::invalid_argument("FeatureMap " + name + ": column out of range");
    Mat out(data.n(), size());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      for (Eigen::Index k = 0; k < size(); ++k) {
        const double v = features[static_cast<std::size_t>(k)].eval(data.row(i));
        if (!std::isfinite(v)) {
          throw std::domain_error("FeatureMap " + name + ": non-finite feature " +
                                  features[static_cast<std::size_t>(k)].name);
        }
        out(i, k) = v;
      }
    }
    return out;
  }
};

namespace features {

inline Feature constant() { return {Feature::Kind::constant, -1, -1, 1, 1, 1.0, "1"}; }

inline Feature power(int col, int p, const std::string& col_name) {
  return {Feature::Kind::monomial, col, -1, p, 1, 1.0, p == 1 ? col_name : col_name + "^" + std::to_string(p)};
}

inline Feature product(int a, int p, int b, const std::string& name) {
  return {Feature::Kind::monomial, a, b, p, 1, 1.0, name};
}

/// Constant plus x, x², ..., x^degree of column 0.
inline FeatureMap polynomial(int degree) {
  if (degree < 1) throw std::invalid_argument("polynomial feature map: degree must be >= 1");
  FeatureMap map{"poly" + std::to_string(degree), {constant()}};
  for (int k = 1; k <= degree; ++k) map.features.push_back(power(0, k, "x"));
  return map;
}

/// Constant plus (x^k, x^k y) pairs for a (y, x) dataset.
inline FeatureMap polynomial_interacted(int degree) {
  if (degree < 1) throw std::invalid_argument("interacted feature map: degree must be >= 1");
  FeatureMap map{"poly_xy" + std::to_string(degree), {constant()}};
  for (int k = 1; k <= degree; ++k) {
    map.features.push_back(power(1, k, "x"));
    map.features.push_back(product(1, k, 0, (k == 1 ? std::string("x") : "x^" + std::to_string(k)) + "*y"));
  }
  return map;
}

/// Linear family nesting the log-ratio of the standard logistic over a unit normal.
inline FeatureMap normal_location_nesting() {
  return {"normal_nesting",
          {constant(), power(0, 1, "x"), power(0, 2, "x"),
           {Feature::Kind::softplus_neg, 0, -1, 1, 1, 1.0, "log(1+exp(-x))"}}};
}

/// Constant, x*y, x and x∨0 for a (y, x) dataset.
inline FeatureMap binary_mild() {
  return {"binary_mild",
          {constant(), product(1, 1, 0, "x*y"), power(1, 1, "x"),
           {Feature::Kind::positive_part, 1, -1, 1, 1, 1.0, "max(x,0)"}}};
}

/// Roy quartet (log_w1, d1, log_w2, d2): levels and squared wages, with an
/// optional cross product of the two wages.
inline FeatureMap roy_wages(bool cross_moment) {
  FeatureMap map{cross_moment ? "roy8" : "roy7",
                 {constant(), power(0, 1, "log_w1"), power(1, 1, "d1"), power(2, 1, "log_w2"),
                  power(3, 1, "d2"), power(0, 2, "log_w1"), power(2, 2, "log_w2")}};
  if (cross_moment) map.features.push_back(product(0, 1, 2, "log_w1*log_w2"));
  return map;
}

/// Built-in map by name: poly<d>, poly_xy<d>, normal_nesting, binary_mild, roy7, roy8.
inline FeatureMap builtin(const std::string& name) {
  auto degree_after = [&](std::size_t prefix) {
    const std::string digits = name.substr(prefix);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("unknown feature map: " + name);
    }
    return std::stoi(digits);
  };
  if (name.rfind("poly_xy", 0) == 0) return polynomial_interacted(degree_after(7));
  if (name.rfind("poly", 0) == 0) return polynomial(degree_after(4));
  if (name == "normal_nesting") return normal_location_nesting();
  if (name == "binary_mild") return binary_mild();
  if (name == "roy7") return roy_wages(false);
  if (name == "roy8") return roy_wages(true);
  throw std::invalid_argument("unknown feature map: " + name);
}

}  // namespace features

/// Λ(λ'f(x)) on raw features.
inline double logistic_eval(const Vec& lambda, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                            const FeatureMap& map) {
  if (lambda.size() != map.size()) throw std::invalid_argument("logistic_eval: weight/feature count mismatch");
  return logistic(lambda.dot(map.eval(x)));
}

/// Affine feature standardization (f - shift) / scale computed on real data.
/// The constant feature keeps shift 0 and scale 1; without a constant only
/// scaling is applied so the span of the map is unchanged.
struct Standardizer {
  Vec shift;
  Vec scale;

  [[nodiscard]] bool empty() const { return shift.size() == 0; }

  static Standardizer fit(const Mat& f, bool allow_shift, const std::vector<bool>& is_constant) {
    Standardizer s{Vec::Zero(f.cols()), Vec::Ones(f.cols())};
    const double n = static_cast<double>(f.rows());
    for (Eigen::Index k = 0; k < f.cols(); ++k) {
      if (is_constant[static_cast<std::size_t>(k)]) continue;
      const double mu = f.col(k).mean();
      const double sd = std::sqrt((f.col(k).array() - mu).square().sum() / std::max(1.0, n - 1.0));
      if (allow_shift) s.shift(k) = mu;
      if (sd > 0.0 && std::isfinite(sd)) s.scale(k) = sd;
    }
    return s;
  }

  [[nodiscard]] Mat apply(const Mat& f) const {
    if (empty()) return f;
    return (f.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array();
  }
};

// ------------------------------------------------------- parametric families

/// Nonlinear-in-λ index families that nest the oracle of a specific model.
enum class ParametricKind {
  /// λ0 - 2 log(1+e^{-x}) + 2 log(1+e^{-(x-λ1)})
  logistic_location,
  /// λ0 + λ1 xy + λ2 x + log(1+e^{-λ3 x}) + λ4 log Φ((2y-1)x)
  binary_choice,
};

inline std::string to_string(ParametricKind k) {
  return k == ParametricKind::logistic_location ? "logistic_location" : "binary_choice";
}

inline ParametricKind parametric_from_string(const std::string& s) {
  if (s == "logistic_location") return ParametricKind::logistic_location;
  if (s == "binary_choice") return ParametricKind::binary_choice;
  throw std::invalid_argument("unknown parametric discriminator: " + s);
}

inline Eigen::Index parametric_dim(ParametricKind k) { return k == ParametricKind::logistic_location ? 2 : 5; }

/// Weights giving D ≡ 1/2.
inline Vec parametric_neutral(ParametricKind k) {
  Vec w = Vec::Zero(parametric_dim(k));
  if (k == ParametricKind::binary_choice) w(0) = -std::log(2.0);
  return w;
}

/// Index, gradient and Hessian of the index with respect to λ at one row.
struct IndexDerivs {
  double g = 0.0;
  Vec grad;
  Mat hess;
};

template <typename Row>
double parametric_index(ParametricKind kind, const Vec& w, const Row& x) {
  if (w.size() != parametric_dim(kind)) throw std::invalid_argument("parametric_index: weight count mismatch");
  if (kind == ParametricKind::logistic_location) {
    return w(0) - 2.0 * softplus_neg(x(0)) + 2.0 * softplus_neg(x(0) - w(1));
  }
  const double y = x(0), c = x(1);
  const double lcs = y * log_normal_cdf(c) + (1.0 - y) * log_normal_cdf(-c);
  return w(0) + w(1) * c * y + w(2) * c + softplus_neg(w(3) * c) + w(4) * lcs;
}

template <typename Row>
IndexDerivs parametric_derivs(ParametricKind kind, const Vec& w, const Row& x) {
  IndexDerivs out;
  const Eigen::Index k = parametric_dim(kind);
  out.g = parametric_index(kind, w, x);
  out.grad = Vec::Zero(k);
  out.hess = Mat::Zero(k, k);
  if (kind == ParametricKind::logistic_location) {
    const double s = logistic(w(1) - x(0));
    out.grad << 1.0, 2.0 * s;
    out.hess(1, 1) = 2.0 * s * (1.0 - s);
    return out;
  }
  const double y = x(0), c = x(1);
  const double lcs = y * log_normal_cdf(c) + (1.0 - y) * log_normal_cdf(-c);
  const double s = logistic(-w(3) * c);
  out.grad << 1.0, c * y, c, -c * s, lcs;
  out.hess(3, 3) = c * c * s * (1.0 - s);
  return out;
}

// ---------------------------------------------------------------------- MLP

enum class Activation { tanh, sigmoid };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "sigmoid"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

struct MlpSpec {
  std::vector<int> hidden{3};
  Activation activation = Activation::tanh;
  /// Label of the child stream used for weight initialization.
  std::string init_label = "mlp-init";

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Widths from input to output, e.g. {d, h1, ..., 1}.
inline std::vector<int> mlp_widths(const MlpSpec& spec, int input_dim) {
  if (spec.hidden.empty()) throw std::invalid_argument("MlpSpec: at least one hidden layer required");
  if (input_dim < 1) throw std::invalid_argument("MlpSpec: input dimension must be >= 1");
  std::vector<int> w{input_dim};
  for (int h : spec.hidden) {
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
    w.push_back(h);
  }
  w.push_back(1);
  return w;
}

/// Layer l stores W_l (out×in, row-major) followed by its bias vector.
inline Eigen::Index mlp_param_count(const std::vector<int>& widths) {
  Eigen::Index count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) count += widths[l + 1] * (widths[l] + 1);
  return count;
}

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMat> layer_weights(const Vec& w, Eigen::Index offset, int out, int in) {
  return {w.data() + offset, out, in};
}

}  // namespace detail

/// Uniform(-0.5, 0.5)/√fan_in weights and zero biases, from a labelled child stream.
inline Vec mlp_init(const MlpSpec& spec, int input_dim, const RngStream& rng) {
  const auto widths = mlp_widths(spec, input_dim);
  RngStream stream = rng.child(spec.init_label);
  Vec w = Vec::Zero(mlp_param_count(widths));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int k = 0; k < out * in; ++k) w(offset + k) = (stream.uniform() - 0.5) * scale;
    offset += out * in + out;
  }
  return w;
}

/// 1 at weight-matrix entries, 0 at biases.
inline Vec mlp_weight_mask(const MlpSpec& spec, int input_dim) {
  const auto widths = mlp_widths(spec, input_dim);
  Vec mask = Vec::Zero(mlp_param_count(widths));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    mask.segment(offset, out * in).setOnes();
    offset += out * in + out;
  }
  return mask;
}

namespace detail {

/// Layer outputs for every row: tape[l] is the input of layer l; the last
/// entry holds the output index.
inline std::vector<Mat> mlp_tape(const MlpSpec& spec, const Vec& w, const Mat& z) {
  const auto widths = mlp_widths(spec, static_cast<int>(z.cols()));
  if (w.size() != mlp_param_count(widths)) throw std::invalid_argument("mlp: weight count mismatch");
  const std::size_t layers = widths.size() - 1;
  std::vector<Mat> acts;
  acts.reserve(layers + 1);
  acts.push_back(z);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = widths[l], out = widths[l + 1];
    const auto wl = layer_weights(w, offset, out, in);
    const Eigen::Map<const Vec> bias(w.data() + offset + out * in, out);
    Mat pre = (acts.back() * wl.transpose()).rowwise() + bias.transpose();
    if (l + 1 < layers) {
      if (spec.activation == Activation::tanh) {
        pre = pre.array().tanh().matrix();
      } else {
        pre = (1.0 / (1.0 + (-pre.array()).exp())).matrix();
      }
    }
    if (!pre.allFinite()) throw std::domain_error("mlp: non-finite activation in layer " + std::to_string(l + 1));
    acts.push_back(std::move(pre));
    offset += out * in + out;
  }
  return acts;
}

inline Vec mlp_backprop_tape(const MlpSpec& spec, const Vec& w, const std::vector<Mat>& acts, const Vec& coef) {
  const auto widths = mlp_widths(spec, static_cast<int>(acts.front().cols()));
  const std::size_t layers = widths.size() - 1;
  std::vector<Eigen::Index> offsets;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets.push_back(offset);
    offset += widths[l + 1] * (widths[l] + 1);
  }
  Vec grad = Vec::Zero(w.size());
  Mat delta = coef;  // N×1: derivative with respect to the output pre-activation
  for (std::size_t l = layers; l-- > 0;) {
    const int in = widths[l], out = widths[l + 1];
    Eigen::Map<RowMat>(grad.data() + offsets[l], out, in) = delta.transpose() * acts[l];
    grad.segment(offsets[l] + out * in, out) = delta.colwise().sum().transpose();
    if (l == 0) break;
    Mat back = delta * layer_weights(w, offsets[l], out, in);
    const auto& v = acts[l].array();
    if (spec.activation == Activation::tanh) {
      back.array() *= 1.0 - v * v;
    } else {
      back.array() *= v * (1.0 - v);
    }
    delta = std::move(back);
  }
  if (!grad.allFinite()) throw std::domain_error("mlp: non-finite gradient");
  return grad;
}

}  // namespace detail

/// Output index for each row of z (N×d, already standardized).
inline Vec mlp_forward(const MlpSpec& spec, const Vec& w, const Mat& z) { return detail::mlp_tape(spec, w, z).back().col(0); }

/// Λ of the network index at one (standardized) row.
inline double mlp_eval(const MlpSpec& spec, const Vec& w, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  return logistic(mlp_forward(spec, w, Mat(z))(0));
}

/// Σ_i c_i ∂g(z_i)/∂w for arbitrary row coefficients c (reverse mode).
inline Vec mlp_backprop(const MlpSpec& spec, const Vec& w, const Mat& z, const Vec& coef) {
  return detail::mlp_backprop_tape(spec, w, detail::mlp_tape(spec, w, z), coef);
}

// ---------------------------------------------------------------- spec/params

enum class DiscFamily { oracle, logistic, parametric, mlp };

inline std::string to_string(DiscFamily f) {
  switch (f) {
    case DiscFamily::oracle: return "oracle";
    case DiscFamily::logistic: return "logistic";
    case DiscFamily::parametric: return "parametric";
    case DiscFamily::mlp: return "mlp";
  }
  return "?";
}

inline DiscFamily family_from_string(const std::string& s) {
  if (s == "oracle") return DiscFamily::oracle;
  if (s == "logistic") return DiscFamily::logistic;
  if (s == "parametric") return DiscFamily::parametric;
  if (s == "mlp") return DiscFamily::mlp;
  throw std::invalid_argument("unknown discriminator family: " + s);
}

struct DiscriminatorSpec {
  DiscFamily family = DiscFamily::oracle;
  FeatureMap features;                                       // logistic
  bool standardize = true;                                   // logistic, mlp
  ParametricKind parametric = ParametricKind::logistic_location;  // parametric
  MlpSpec mlp;                                               // mlp

  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;

  static DiscriminatorSpec oracle() { return {}; }
  static DiscriminatorSpec logistic(FeatureMap map) {
    DiscriminatorSpec s;
    s.family = DiscFamily::logistic;
    s.features = std::move(map);
    return s;
  }
  static DiscriminatorSpec nesting(ParametricKind kind) {
    DiscriminatorSpec s;
    s.family = DiscFamily::parametric;
    s.parametric = kind;
    return s;
  }
  static DiscriminatorSpec network(MlpSpec mlp) {
    DiscriminatorSpec s;
    s.family = DiscFamily::mlp;
    s.mlp = std::move(mlp);
    return s;
  }
};

/// Trained weights plus the input standardization they refer to.
struct DiscriminatorParams {
  DiscFamily family = DiscFamily::oracle;
  Vec weights;
  Standardizer standardizer;
  bool frozen = false;
  bool converged = true;
  int iterations = 0;
  double grad_inf_norm = 0.0;
  std::vector<double> trace;
};

/// Logistic weights on raw (unstandardized) features.
inline Vec raw_logistic_weights(const DiscriminatorParams& params, const FeatureMap& map) {
  if (params.standardizer.empty()) return params.weights;
  Vec raw = params.weights.array() / params.standardizer.scale.array();
  double shift = 0.0;
  int constant = -1;
  for (Eigen::Index k = 0; k < map.size(); ++k) {
    if (map.features[static_cast<std::size_t>(k)].kind == Feature::Kind::constant) constant = static_cast<int>(k);
    shift += raw(k) * params.standardizer.shift(k);
  }
  if (constant >= 0) raw(constant) -= shift;
  return raw;
}

/// Oracle inputs: the truth law of the real data and the fitted model at θ.
struct OracleModel {
  const DataLaw* truth = nullptr;
  GeneratorSpec model;
  ParamVector theta;
};

/// log p0(x) - log pθ(x); ±inf where one density vanishes.
template <typename Row>
double oracle_index(const OracleModel& om, const Row& x) {
  if (om.truth == nullptr) throw std::invalid_argument("oracle: truth law required");
  if (!has_likelihood(om.truth->spec, om.truth->theta) || !has_likelihood(om.model, om.theta)) {
    throw std::domain_error("oracle: unsupported model pair (no closed-form densities)");
  }
  const LogDensity l0 = log_density(om.truth->spec, om.truth->theta, x);
  const LogDensity lt = log_density(om.model, om.theta, x);
  if (!l0.supported && !lt.supported) throw std::domain_error("oracle: observation unsupported by both laws");
  if (!l0.supported) return -kInf;
  if (!lt.supported) return kInf;
  return l0.value - lt.value;
}

template <typename Row>
double oracle_discriminator(const OracleModel& om, const Row& x) {
  return logistic(oracle_index(om, x));
}

// ----------------------------------------------------- batch index and loss

namespace detail {

/// Inputs for the neural network: raw columns, optionally standardized.
inline Mat mlp_inputs(const Dataset& data, const Standardizer& s) { return s.empty() ? data.rows() : s.apply(data.rows()); }

inline Standardizer mlp_standardizer(const Dataset& real) {
  return Standardizer::fit(real.rows(), true, std::vector<bool>(static_cast<std::size_t>(real.d()), false));
}

inline std::vector<bool> constant_mask(const FeatureMap& map) {
  std::vector<bool> mask;
  for (const auto& f : map.features) mask.push_back(f.kind == Feature::Kind::constant);
  return mask;
}

}  // namespace detail

/// Indices g(x_i) of a trained (or oracle) discriminator over a dataset.
inline Vec discriminator_indices(const DiscriminatorSpec& spec, const DiscriminatorParams& params,
                                 const Dataset& data, const OracleModel* oracle = nullptr) {
  Vec g(data.n());
  switch (spec.family) {
    case DiscFamily::oracle:
      if (oracle == nullptr) throw std::invalid_argument("oracle family needs an OracleModel");
      for (Eigen::Index i = 0; i < data.n(); ++i) g(i) = oracle_index(*oracle, data.row(i));
      return g;
    case DiscFamily::logistic: {
      const Mat f = params.standardizer.apply(spec.features.eval_all(data));
      if (params.weights.size() != f.cols()) throw std::invalid_argument("logistic: dimension mismatch");
      return f * params.weights;
    }
    case DiscFamily::parametric:
      for (Eigen::Index i = 0; i < data.n(); ++i) g(i) = parametric_index(spec.parametric, params.weights, data.row(i));
      return g;
    case DiscFamily::mlp:
      return mlp_forward(spec.mlp, params.weights, detail::mlp_inputs(data, params.standardizer));
  }
  return g;
}

/// Unclamped sample loss (1/n)Σ log Λ(g_real) + (1/m)Σ log(1-Λ(g_synth)).
inline double loss_from_indices(const Vec& g_real, const Vec& g_synth) {
  double a = 0.0, b = 0.0;
  for (Eigen::Index i = 0; i < g_real.size(); ++i) a += log_logistic(g_real(i));
  for (Eigen::Index i = 0; i < g_synth.size(); ++i) b += log1m_logistic(g_synth(i));
  return a / static_cast<double>(g_real.size()) + b / static_cast<double>(g_synth.size());
}

/// Row coefficients ∂loss/∂g: (1-Λ(g))/n on real rows and -Λ(g)/m on synthetic rows.
inline std::pair<Vec, Vec> loss_index_slopes(const Vec& g_real, const Vec& g_synth) {
  const double n = static_cast<double>(g_real.size()), m = static_cast<double>(g_synth.size());
  Vec cr(g_real.size()), cs(g_synth.size());
  for (Eigen::Index i = 0; i < g_real.size(); ++i) cr(i) = logistic(-g_real(i)) / n;
  for (Eigen::Index i = 0; i < g_synth.size(); ++i) cs(i) = -logistic(g_synth(i)) / m;
  return {cr, cs};
}

/// Exact gradient of the unclamped sample loss with respect to the weights.
inline Vec grad_loss_wrt_params(const DiscriminatorSpec& spec, const DiscriminatorParams& params,
                                const Dataset& real, const Dataset& synth) {
  if (real.empty() || synth.empty()) throw std::invalid_argument("grad_loss_wrt_params: empty batch");
  const Vec gr = discriminator_indices(spec, params, real);
  const Vec gs = discriminator_indices(spec, params, synth);
  const auto [cr, cs] = loss_index_slopes(gr, gs);
  switch (spec.family) {
    case DiscFamily::oracle: throw std::invalid_argument("grad_loss_wrt_params: oracle has no weights");
    case DiscFamily::logistic: {
      const Mat fr = params.standardizer.apply(spec.features.eval_all(real));
      const Mat fs = params.standardizer.apply(spec.features.eval_all(synth));
      return fr.transpose() * cr + fs.transpose() * cs;
    }
    case DiscFamily::parametric: {
      Vec grad = Vec::Zero(params.weights.size());
      for (Eigen::Index i = 0; i < real.n(); ++i)
        grad += cr(i) * parametric_derivs(spec.parametric, params.weights, real.row(i)).grad;
      for (Eigen::Index i = 0; i < synth.n(); ++i)
        grad += cs(i) * parametric_derivs(spec.parametric, params.weights, synth.row(i)).grad;
      return grad;
    }
    case DiscFamily::mlp:
      return mlp_backprop(spec.mlp, params.weights, detail::mlp_inputs(real, params.standardizer), cr) +
             mlp_backprop(spec.mlp, params.weights, detail::mlp_inputs(synth, params.standardizer), cs);
  }
  return {};
}

}  // namespace advest
