#pragma once

// JSON run configuration. Parsing is strict: unknown keys are rejected with
// their full path, missing keys take defaults, and emitted files list every
// field so parse(emit(c)) == c.

#include "advest/experiments.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace advest {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Surface scan request (CLI `surface`).
struct SurfaceRequest {
  std::string coordinate = "theta";
  double lower = -1.0;
  double upper = 1.0;
  int points = 41;
  std::string roster_label;  // empty: first adversarial entry

  friend bool operator==(const SurfaceRequest&, const SurfaceRequest&) = default;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  ExperimentSpec experiment = logistic_location_experiment();
  int jobs = 1;
  std::string out = "out";
  /// Roster labels to run; empty runs the full roster.
  std::vector<std::string> only;
  SurfaceRequest surface;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_detail {

inline Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

/// Reads an object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  [[nodiscard]] std::string at(const std::string& key) const { return path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const Json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        out = read_double(v);
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
        out = v.get<T>();
      } else {
        out = v.get<T>();
      }
    } catch (const ConfigError& e) {
      throw ConfigError(at(key) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(at(key) + ": " + e.what());
    }
  }

  /// String mapped through `parse`; errors name the key path.
  template <class E, class F>
  void get_enum(const std::string& key, E& out, F parse) {
    if (!has(key)) return;
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    try {
      out = parse(v.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(at(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key: " + at(it.key()));
    }
  }

  static double read_double(const Json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return kInf;
      if (s == "-inf") return -kInf;
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError("expected a number");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline std::string to_string(Feature::Kind k) {
  switch (k) {
    case Feature::Kind::constant: return "constant";
    case Feature::Kind::monomial: return "monomial";
    case Feature::Kind::softplus_neg: return "softplus_neg";
    case Feature::Kind::log_cdf_signed: return "log_cdf_signed";
    case Feature::Kind::positive_part: return "positive_part";
  }
  return "?";
}

inline Feature::Kind feature_kind_from_string(const std::string& s) {
  for (auto k : {Feature::Kind::constant, Feature::Kind::monomial, Feature::Kind::softplus_neg,
                 Feature::Kind::log_cdf_signed, Feature::Kind::positive_part}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown feature kind: " + s);
}

inline std::string to_string(ParamTransform t) {
  switch (t) {
    case ParamTransform::identity: return "identity";
    case ParamTransform::log: return "log";
    case ParamTransform::atanh: return "atanh";
  }
  return "?";
}

inline ParamTransform transform_from_string(const std::string& s) {
  if (s == "identity") return ParamTransform::identity;
  if (s == "log") return ParamTransform::log;
  if (s == "atanh") return ParamTransform::atanh;
  throw std::invalid_argument("unknown transform: " + s);
}

inline EstimatorKind estimator_from_string(const std::string& s) {
  for (auto k : {EstimatorKind::adversarial, EstimatorKind::mle, EstimatorKind::qmle, EstimatorKind::smm, EstimatorKind::ii}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown estimator: " + s);
}

template <class T>
std::vector<T> read_list(Reader& r, const std::string& key, const std::function<T(const Json&, const std::string&)>& item) {
  std::vector<T> out;
  const Json& v = r.raw(key);
  if (!v.is_array()) throw ConfigError(r.at(key) + ": expected an array");
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(item(v[i], r.at(key) + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace config_detail

// ------------------------------------------------------------------ emit

inline Json to_json(const GeneratorSpec& g) {
  return {{"model", to_string(g.model)},
          {"error_law", to_string(g.error_law)},
          {"smoothing_h", g.smoothing_h},
          {"roy", {{"quadrature_nodes", g.roy.quadrature_nodes}, {"conditional_expectation", g.roy.conditional_expectation}}}};
}

inline Json to_json(const ParamVector& p) {
  using config_detail::num;
  Json free = Json::array();
  for (const auto& e : p.entries()) {
    free.push_back({{"name", e.name},
                    {"value", num(e.value)},
                    {"lower", num(e.lower)},
                    {"upper", num(e.upper)},
                    {"transform", config_detail::to_string(e.transform)}});
  }
  Json fixed = Json::object();
  for (const auto& [k, v] : p.fixed()) fixed[k] = num(v);
  return {{"free", free}, {"fixed", fixed}};
}

inline Json to_json(const DataLaw& d) {
  return {{"model", to_json(d.spec)},
          {"theta", to_json(d.theta)},
          {"covariates", {{"present", d.covariates.present}, {"mean", d.covariates.mean}, {"sd", d.covariates.sd}}}};
}

inline Json to_json(const FeatureMap& f) {
  Json list = Json::array();
  for (const auto& x : f.features) {
    list.push_back({{"kind", config_detail::to_string(x.kind)},
                    {"a", x.a},
                    {"b", x.b},
                    {"p", x.p},
                    {"q", x.q},
                    {"scale", x.scale},
                    {"name", x.name}});
  }
  return {{"name", f.name}, {"features", list}};
}

inline Json to_json(const DiscriminatorSpec& d) {
  return {{"family", to_string(d.family)},
          {"features", to_json(d.features)},
          {"standardize", d.standardize},
          {"parametric", to_string(d.parametric)},
          {"mlp", {{"hidden", d.mlp.hidden}, {"activation", to_string(d.mlp.activation)}, {"init_label", d.mlp.init_label}}}};
}

inline Json to_json(const TrainConfig& t) {
  return {{"optimizer", to_string(t.optimizer)}, {"newton_iters", t.newton_iters}, {"tol", t.tol},
          {"mlp_iters", t.mlp_iters},            {"mlp_tol", t.mlp_tol},           {"lr", t.lr},
          {"ridge", t.ridge},                    {"mlp_decay", t.mlp_decay},       {"clamp", t.clamp}};
}

inline Json to_json(const OptimizerConfig& o) {
  Json grid = Json::array();
  for (const auto& g : o.grid) grid.push_back({{"name", g.name}, {"lower", g.lower}, {"upper", g.upper}, {"points", g.points}});
  return {{"method", to_string(o.method)}, {"simplex_scale", o.simplex_scale}, {"ftol", o.ftol},
          {"xtol", o.xtol},                {"max_evals", o.max_evals},         {"grid", grid},
          {"starts", o.starts},            {"jitter", o.jitter}};
}

inline Json to_json(const RosterEntry& e) {
  Json j = {{"label", e.label},
            {"kind", to_string(e.kind)},
            {"discriminator", to_json(e.disc)},
            {"smoothing_h", e.smoothing_h},
            {"moments", to_json(e.moments)},
            {"ii_degree", e.ii_degree},
            {"weighting", to_string(e.weighting)},
            {"optimizer", e.opt ? to_json(*e.opt) : Json(nullptr)},
            {"start_from", e.start_from},
            {"monte_carlo", e.monte_carlo}};
  return j;
}

inline Json to_json(const Target& t) {
  using config_detail::num;
  return {{"name", t.name},
          {"stat", to_string(t.stat)},
          {"a", t.a},
          {"b", t.b},
          {"c", t.c},
          {"coordinate", t.coordinate},
          {"lower", num(t.lower)},
          {"upper", num(t.upper)},
          {"reference", num(t.reference)},
          {"provenance", to_string(t.provenance)},
          {"note_key", t.note_key},
          {"point", num(t.point)}};
}

inline Json to_json(const ExperimentSpec& e) {
  Json roster = Json::array();
  for (const auto& r : e.roster) roster.push_back(to_json(r));
  Json targets = Json::array();
  for (const auto& t : e.targets) targets.push_back(to_json(t));
  return {{"id", e.id},
          {"description", e.description},
          {"model", to_json(e.model)},
          {"start", to_json(e.start)},
          {"theta0", to_json(e.theta0)},
          {"real_law", to_json(e.real_law)},
          {"n", e.n},
          {"m", e.m},
          {"reps", e.reps},
          {"boot", e.boot},
          {"train", to_json(e.train)},
          {"optimizer", to_json(e.opt)},
          {"roster", roster},
          {"targets", targets},
          {"bootstrap_labels", e.bootstrap_labels},
          {"seed", e.seed}};
}

inline Json to_json(const RunConfig& c) {
  return {{"schema_version", c.schema_version},
          {"experiment", to_json(c.experiment)},
          {"jobs", c.jobs},
          {"out", c.out},
          {"only", c.only},
          {"surface",
           {{"coordinate", c.surface.coordinate},
            {"lower", c.surface.lower},
            {"upper", c.surface.upper},
            {"points", c.surface.points},
            {"roster_label", c.surface.roster_label}}}};
}

// ----------------------------------------------------------------- parse

inline GeneratorSpec generator_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  GeneratorSpec g;
  r.get_enum("model", g.model, model_from_string);
  r.get_enum("error_law", g.error_law, error_law_from_string);
  r.get("smoothing_h", g.smoothing_h);
  if (r.has("roy")) {
    config_detail::Reader ry(r.raw("roy"), r.at("roy"));
    ry.get("quadrature_nodes", g.roy.quadrature_nodes);
    ry.get("conditional_expectation", g.roy.conditional_expectation);
    ry.finish();
  }
  r.finish();
  return g;
}

inline ParamVector params_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  ParamVector p;
  try {
    if (r.has("free")) {
      const Json& list = r.raw("free");
      if (!list.is_array()) throw ConfigError(r.at("free") + ": expected an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        config_detail::Reader e(list[i], r.at("free") + "[" + std::to_string(i) + "]");
        std::string name;
        double value = 0.0, lower = -kInf, upper = kInf;
        ParamTransform t = ParamTransform::identity;
        e.get("name", name);
        e.get("value", value);
        e.get("lower", lower);
        e.get("upper", upper);
        e.get_enum("transform", t, config_detail::transform_from_string);
        e.finish();
        if (name.empty()) throw ConfigError(e.at("name") + ": required");
        p.add(name, value, lower, upper, t);
      }
    }
    if (r.has("fixed")) {
      const Json& fixed = r.raw("fixed");
      if (!fixed.is_object()) throw ConfigError(r.at("fixed") + ": expected an object");
      for (auto it = fixed.begin(); it != fixed.end(); ++it) p.fix(it.key(), config_detail::Reader::read_double(it.value()));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  r.finish();
  return p;
}

inline DataLaw datalaw_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  DataLaw d;
  if (r.has("model")) d.spec = generator_from_json(r.raw("model"), r.at("model"));
  if (r.has("theta")) d.theta = params_from_json(r.raw("theta"), r.at("theta"));
  if (r.has("covariates")) {
    config_detail::Reader c(r.raw("covariates"), r.at("covariates"));
    c.get("present", d.covariates.present);
    c.get("mean", d.covariates.mean);
    c.get("sd", d.covariates.sd);
    c.finish();
  }
  r.finish();
  return d;
}

inline FeatureMap features_from_json(const Json& j, const std::string& path) {
  // A bare string names a built-in map.
  if (j.is_string()) {
    try {
      return features::builtin(j.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  config_detail::Reader r(j, path);
  FeatureMap f;
  r.get("name", f.name);
  if (r.has("features")) {
    f.features = config_detail::read_list<Feature>(r, "features", [](const Json& v, const std::string& p) {
      config_detail::Reader e(v, p);
      Feature x;
      e.get_enum("kind", x.kind, config_detail::feature_kind_from_string);
      e.get("a", x.a);
      e.get("b", x.b);
      e.get("p", x.p);
      e.get("q", x.q);
      e.get("scale", x.scale);
      e.get("name", x.name);
      e.finish();
      return x;
    });
  }
  r.finish();
  return f;
}

inline DiscriminatorSpec discriminator_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  DiscriminatorSpec d;
  r.get_enum("family", d.family, family_from_string);
  if (r.has("features")) d.features = features_from_json(r.raw("features"), r.at("features"));
  r.get("standardize", d.standardize);
  r.get_enum("parametric", d.parametric, parametric_from_string);
  if (r.has("mlp")) {
    config_detail::Reader m(r.raw("mlp"), r.at("mlp"));
    m.get("hidden", d.mlp.hidden);
    m.get_enum("activation", d.mlp.activation, activation_from_string);
    m.get("init_label", d.mlp.init_label);
    m.finish();
  }
  r.finish();
  return d;
}

inline TrainConfig train_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  TrainConfig t;
  r.get_enum("optimizer", t.optimizer, train_optimizer_from_string);
  r.get("newton_iters", t.newton_iters);
  r.get("tol", t.tol);
  r.get("mlp_iters", t.mlp_iters);
  r.get("mlp_tol", t.mlp_tol);
  r.get("lr", t.lr);
  r.get("ridge", t.ridge);
  r.get("mlp_decay", t.mlp_decay);
  r.get("clamp", t.clamp);
  r.finish();
  try {
    t.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return t;
}

inline OptimizerConfig optimizer_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  OptimizerConfig o;
  r.get_enum("method", o.method, opt_method_from_string);
  r.get("simplex_scale", o.simplex_scale);
  r.get("ftol", o.ftol);
  r.get("xtol", o.xtol);
  r.get("max_evals", o.max_evals);
  if (r.has("grid")) {
    o.grid = config_detail::read_list<GridAxis>(r, "grid", [](const Json& v, const std::string& p) {
      config_detail::Reader g(v, p);
      GridAxis a;
      g.get("name", a.name);
      g.get("lower", a.lower);
      g.get("upper", a.upper);
      g.get("points", a.points);
      g.finish();
      return a;
    });
  }
  r.get("starts", o.starts);
  r.get("jitter", o.jitter);
  r.finish();
  if (o.starts < 1 || o.max_evals < 1) throw ConfigError(path + ": starts and max_evals must be >= 1");
  return o;
}

inline RosterEntry roster_entry_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  RosterEntry e;
  r.get("label", e.label);
  r.get_enum("kind", e.kind, config_detail::estimator_from_string);
  if (r.has("discriminator")) e.disc = discriminator_from_json(r.raw("discriminator"), r.at("discriminator"));
  r.get("smoothing_h", e.smoothing_h);
  if (r.has("moments")) e.moments = features_from_json(r.raw("moments"), r.at("moments"));
  r.get("ii_degree", e.ii_degree);
  r.get_enum("weighting", e.weighting, weighting_from_string);
  if (r.has("optimizer")) {
    const Json& o = r.raw("optimizer");
    if (!o.is_null()) e.opt = optimizer_from_json(o, r.at("optimizer"));
  }
  r.get("start_from", e.start_from);
  r.get("monte_carlo", e.monte_carlo);
  r.finish();
  if (e.label.empty()) throw ConfigError(path + ".label: required");
  return e;
}

inline Target target_from_json(const Json& j, const std::string& path) {
  config_detail::Reader r(j, path);
  Target t;
  r.get("name", t.name);
  r.get_enum("stat", t.stat, stat_from_string);
  r.get("a", t.a);
  r.get("b", t.b);
  r.get("c", t.c);
  r.get("coordinate", t.coordinate);
  r.get("lower", t.lower);
  r.get("upper", t.upper);
  r.get("reference", t.reference);
  r.get_enum("provenance", t.provenance, provenance_from_string);
  r.get("note_key", t.note_key);
  r.get("point", t.point);
  r.finish();
  return t;
}

/// A bare string or {"id": ..., ...} starting from a registered experiment;
/// listed fields replace the registered ones.
inline ExperimentSpec experiment_from_json(const Json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return find_experiment(j.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  config_detail::Reader r(j, path);
  ExperimentSpec e;
  std::string id;
  r.get("id", id);
  if (!id.empty()) {
    try {
      e = find_experiment(id);
    } catch (const std::out_of_range&) {
      e.id = id;  // custom experiment: every field must be listed
    }
  }
  r.get("description", e.description);
  if (r.has("model")) e.model = generator_from_json(r.raw("model"), r.at("model"));
  if (r.has("start")) e.start = params_from_json(r.raw("start"), r.at("start"));
  if (r.has("theta0")) e.theta0 = params_from_json(r.raw("theta0"), r.at("theta0"));
  if (r.has("real_law")) e.real_law = datalaw_from_json(r.raw("real_law"), r.at("real_law"));
  r.get("n", e.n);
  r.get("m", e.m);
  r.get("reps", e.reps);
  r.get("boot", e.boot);
  if (r.has("train")) e.train = train_from_json(r.raw("train"), r.at("train"));
  if (r.has("optimizer")) e.opt = optimizer_from_json(r.raw("optimizer"), r.at("optimizer"));
  if (r.has("roster")) e.roster = config_detail::read_list<RosterEntry>(r, "roster", roster_entry_from_json);
  if (r.has("targets")) e.targets = config_detail::read_list<Target>(r, "targets", target_from_json);
  r.get("bootstrap_labels", e.bootstrap_labels);
  r.get("seed", e.seed);
  r.finish();
  try {
    e.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return e;
}

inline RunConfig run_config_from_json(const Json& j) {
  config_detail::Reader r(j, "$");
  RunConfig c;
  if (!r.has("schema_version")) throw ConfigError("$.schema_version: required");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("$.schema_version: unsupported version " + std::to_string(c.schema_version));
  }
  if (r.has("experiment")) c.experiment = experiment_from_json(r.raw("experiment"), r.at("experiment"));
  r.get("jobs", c.jobs);
  r.get("out", c.out);
  r.get("only", c.only);
  if (r.has("surface")) {
    config_detail::Reader s(r.raw("surface"), r.at("surface"));
    s.get("coordinate", c.surface.coordinate);
    s.get("lower", c.surface.lower);
    s.get("upper", c.surface.upper);
    s.get("points", c.surface.points);
    s.get("roster_label", c.surface.roster_label);
    s.finish();
  }
  r.finish();
  if (c.jobs < 1) throw ConfigError("$.jobs: must be >= 1");
  for (const auto& label : c.only) {
    try {
      (void)c.experiment.entry(label);
    } catch (const std::exception& e) {
      throw ConfigError("$.only: " + std::string(e.what()));
    }
  }
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

inline std::string emit_run_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace advest
