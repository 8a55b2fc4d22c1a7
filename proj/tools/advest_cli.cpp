// Command-line front end: estimate, surface, mc, bootstrap, run-experiment,
// list-experiments. Exit codes: 0 success, 1 usage or configuration error,
// 2 numerical failure.

#include "advest/io.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace advest;

constexpr int kUsageError = 1;
constexpr int kNumericalError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string experiment;
  std::string config;
  std::string out;
  std::optional<int> reps, boot, jobs;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::vector<std::string> only;
  std::string coord;
  std::string grid;
  std::string data;
};

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--override expects key=value, got: " + item);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

/// Resolves config file, --experiment and flag overrides into one RunConfig.
RunConfig resolve(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_run_config(o.config);
  } else if (o.experiment.empty()) {
    throw UsageError("pass --experiment ID or --config FILE");
  }
  if (!o.experiment.empty()) {
    try {
      cfg.experiment = find_experiment(o.experiment);
    } catch (const std::out_of_range& e) {
      throw UsageError(e.what());
    }
  }
  auto overrides = parse_overrides(o.overrides);
  if (o.reps) overrides["reps"] = std::to_string(*o.reps);
  if (o.boot) overrides["boot"] = std::to_string(*o.boot);
  try {
    cfg.experiment = apply_overrides(cfg.experiment, overrides);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (o.seed) cfg.experiment.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (cfg.jobs < 1) throw UsageError("--jobs must be >= 1");
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.only.empty()) cfg.only = o.only;
  for (const auto& label : cfg.only) {
    try {
      (void)cfg.experiment.entry(label);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  if (!o.coord.empty()) cfg.surface.coordinate = o.coord;
  if (!o.grid.empty()) {
    double lo = 0, hi = 0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(o.grid);
    if (!(in >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || !in.eof() || n < 2 || !(hi > lo)) {
      throw UsageError("--grid expects lo:hi:n with hi > lo and n >= 2, got: " + o.grid);
    }
    cfg.surface.lower = lo;
    cfg.surface.upper = hi;
    cfg.surface.points = n;
  }
  return cfg;
}

std::filesystem::path out_dir(const RunConfig& cfg) { return std::filesystem::path(cfg.out) / cfg.experiment.id; }

void echo(const RunConfig& cfg) { write_atomic(out_dir(cfg) / "run_config.json", emit_run_config(cfg)); }

/// Replication-0 data, or the user's CSV when --data is given.
std::pair<Dataset, LatentDraws> base_data(const RunConfig& cfg, const Options& o, const RngStream& stream) {
  auto [real, latent] = replication_data(cfg.experiment, stream);
  if (!o.data.empty()) {
    std::ifstream in(o.data);
    if (!in) throw UsageError("cannot open data file " + o.data);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      real = read_dataset_csv(cfg.experiment.model, buf.str());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (is_conditional(cfg.experiment.model) && real.n() != latent.m()) {
      latent = draw_latent(cfg.experiment.model, stream.child("latent"), real.n());
    }
  }
  return {std::move(real), std::move(latent)};
}

int cmd_list() {
  for (const auto& e : registry()) {
    std::cout << e.id << "\t" << e.description << "\n";
    std::cout << "  n=" << e.n << " m=" << e.m << " reps=" << e.reps << " boot=" << e.boot << " roster:";
    for (const auto& r : e.roster) std::cout << " " << r.label;
    std::cout << "\n";
    for (const auto& t : e.targets) {
      std::cout << "  target " << t.name << " [" << t.lower << ", " << t.upper << "] (" << to_string(t.provenance) << ")\n";
    }
  }
  return 0;
}

int cmd_estimate(const Options& o) {
  const RunConfig cfg = resolve(o);
  echo(cfg);
  const RngStream stream = replication_stream(cfg.experiment.seed, 0);
  const auto [real, latent] = base_data(cfg, o, stream);
  std::map<std::string, std::string> errors;
  const auto reports = run_roster(cfg.experiment, real, latent, stream, cfg.only, &errors);
  Json j = Json::object();
  for (const auto& [label, rep] : reports) {
    Json theta = Json::object();
    for (const auto& e : rep.theta_hat.entries()) theta[e.name] = e.value;
    j[label] = {{"method", to_string(rep.method)},
                {"theta", theta},
                {"criterion", config_detail::num(rep.criterion)},
                {"evaluations", rep.evaluations},
                {"converged", rep.converged}};
  }
  for (const auto& [label, msg] : errors) j[label] = {{"error", msg}};
  write_atomic(out_dir(cfg) / "estimates.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return reports.empty() ? kNumericalError : 0;
}

int cmd_surface(const Options& o) {
  const RunConfig cfg = resolve(o);
  echo(cfg);
  const ExperimentSpec& spec = cfg.experiment;
  std::string label = cfg.surface.roster_label;
  if (!cfg.only.empty()) label = cfg.only.front();
  if (label.empty()) {
    for (const auto& e : spec.roster) {
      if (e.kind == EstimatorKind::adversarial) {
        label = e.label;
        break;
      }
    }
  }
  const RosterEntry& entry = spec.entry(label);
  if (entry.kind != EstimatorKind::adversarial) throw UsageError("surface: " + label + " is not an adversarial entry");
  const RngStream stream = replication_stream(spec.seed, 0);
  const auto [real, latent] = base_data(cfg, o, stream);
  const EstimationContext ctx = make_context(spec, entry, real, latent, spec.theta0, stream.child(label));
  if (ctx.theta.index_of(cfg.surface.coordinate) < 0) throw UsageError("surface: unknown coordinate " + cfg.surface.coordinate);
  const GridAxis axis{cfg.surface.coordinate, cfg.surface.lower, cfg.surface.upper, cfg.surface.points};
  const LossSurface s = surface_scan(ctx, axis.name, axis.values(), {}, cfg.jobs);
  write_atomic(out_dir(cfg) / "surface.csv", surface_csv(s));
  std::cout << surface_csv(s);
  try {
    const CurvatureReport c = curvature_fit(s);
    std::cout << "curvature profiled " << (c.profiled ? c.profiled->curvature : NAN) << " loglik "
              << (c.loglik ? c.loglik->curvature : NAN) << " ratio " << c.profiled_over_loglik << "\n";
  } catch (const std::invalid_argument&) {
    std::cout << "curvature: too few finite points\n";
  }
  return 0;
}

int cmd_mc(const Options& o, bool full) {
  RunConfig cfg = resolve(o);
  if (!full) cfg.experiment.boot = 0;
  echo(cfg);
  const ExperimentResult r = run_experiment(cfg.experiment, cfg.jobs, cfg.only);
  const auto dir = out_dir(cfg);
  write_atomic(dir / "mc_summary.json", experiment_result_json(r).dump(2) + "\n");
  std::string draws;
  bool first = true;
  for (const auto& [label, s] : r.summaries) {
    std::string part = draws_csv(s, label);
    if (!first) part = part.substr(part.find('\n') + 1);  // one header for the stacked table
    draws += part;
    first = false;
  }
  write_atomic(dir / "draws.csv", draws);
  std::cout << scorecard_table(r);
  for (const auto& [label, s] : r.summaries) {
    std::cout << label << ": ok " << s.successes() << "/" << s.replications();
    for (std::size_t j = 0; j < s.names.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      std::cout << "  " << s.names[j] << " mean " << s.mean(jj) << " sqrt_n_sd " << s.sqrt_n_sd(jj);
    }
    std::cout << "\n";
  }
  for (const auto& [label, b] : r.bootstraps) {
    std::cout << "bootstrap " << label << ": ok " << b.draws.rows() - b.failures << "/" << b.draws.rows();
    for (std::size_t j = 0; j < b.names.size(); ++j) std::cout << "  " << b.names[j] << " se " << b.se(static_cast<Eigen::Index>(j));
    std::cout << "\n";
  }
  return 0;
}

int cmd_bootstrap(const Options& o) {
  RunConfig cfg = resolve(o);
  if (cfg.experiment.boot < 2) throw UsageError("bootstrap: --boot must be >= 2");
  if (!cfg.only.empty()) cfg.experiment.bootstrap_labels = cfg.only;
  if (cfg.experiment.bootstrap_labels.empty()) throw UsageError("bootstrap: no roster labels selected (use --only)");
  echo(cfg);
  ExperimentSpec spec = cfg.experiment;
  spec.reps = 1;
  const ExperimentResult r = run_experiment(spec, cfg.jobs, spec.bootstrap_labels);
  Json j = Json::object();
  for (const auto& [label, b] : r.bootstraps) j[label] = bootstrap_json(b, spec.n);
  write_atomic(out_dir(cfg) / "bootstrap.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial estimation of simulated structural models"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--experiment", o.experiment, "Registered experiment id");
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--out", o.out, "Output directory (default: out)");
    sub->add_option("--seed", o.seed, "Master seed (decimal 64-bit)");
    sub->add_option("--jobs", o.jobs, "Worker threads (default 1)");
    sub->add_option("--override", o.overrides, "key=value experiment override (repeatable)");
    sub->add_option("--only", o.only, "Restrict to roster labels (repeatable)");
    sub->add_option("--reps", o.reps, "Monte Carlo replications");
    sub->add_option("--boot", o.boot, "Bootstrap draws");
  };
  auto* list = app.add_subcommand("list-experiments", "List registered experiments and targets");
  auto* est = app.add_subcommand("estimate", "Estimate every roster entry on one dataset");
  add_common(est);
  est->add_option("--data", o.data, "CSV of real observations (default: replication-0 draw)");
  auto* surf = app.add_subcommand("surface", "Scan one coordinate of the loss surface");
  add_common(surf);
  surf->add_option("--coord", o.coord, "Coordinate to scan");
  surf->add_option("--grid", o.grid, "lo:hi:n");
  surf->add_option("--data", o.data, "CSV of real observations");
  auto* mc = app.add_subcommand("mc", "Monte Carlo over the roster");
  add_common(mc);
  auto* boot = app.add_subcommand("bootstrap", "Bootstrap standard errors on one dataset");
  add_common(boot);
  auto* run = app.add_subcommand("run-experiment", "Monte Carlo, bootstrap and scorecard");
  add_common(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  try {
    if (*list) return cmd_list();
    if (*est) return cmd_estimate(o);
    if (*surf) return cmd_surface(o);
    if (*mc) return cmd_mc(o, false);
    if (*boot) return cmd_bootstrap(o);
    if (*run) return cmd_mc(o, true);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  }
  return kUsageError;
}
