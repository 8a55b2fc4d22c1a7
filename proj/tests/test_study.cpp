// Experiment registry, configuration files and output writers.

#include "advest/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace advest;

namespace {

std::string config_error(const std::string& text) {
  try {
    (void)parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentSpec small_location(int reps) {
  return apply_overrides(find_experiment("logistic_location"), {{"reps", std::to_string(reps)}, {"boot", "0"}});
}

}  // namespace

// ---------------------------------------------------------------- registry

TEST(Registry, IdsAreUniqueAndSpecsValidate) {
  std::set<std::string> ids;
  for (const ExperimentSpec& e : registry()) {
    EXPECT_TRUE(ids.insert(e.id).second) << e.id;
    EXPECT_NO_THROW(e.validate()) << e.id;
    EXPECT_FALSE(e.roster.empty()) << e.id;
    EXPECT_FALSE(e.targets.empty()) << e.id;
    EXPECT_EQ(find_experiment(e.id), e);
  }
  for (const char* id : {"logistic_location", "logistic_location_m10x", "normal_misspec", "binary_misspec", "smm_curse",
                         "ii_compare", "roy_fixed_rhot", "roy_full", "smm_equivalence"}) {
    EXPECT_TRUE(ids.count(id)) << id;
  }
  EXPECT_THROW(find_experiment("nope"), std::out_of_range);
}

TEST(Registry, EveryTargetHasANoteAndKnownEstimators) {
  for (const ExperimentSpec& e : registry()) {
    std::set<std::string> labels;
    for (const auto& r : e.roster) labels.insert(r.label);
    for (const Target& t : e.targets) {
      EXPECT_TRUE(experiment_notes().count(t.note_key)) << e.id << "/" << t.name << " note " << t.note_key;
      EXPECT_LE(t.lower, t.upper) << t.name;
    }
    for (const auto& b : e.bootstrap_labels) EXPECT_TRUE(labels.count(b)) << e.id << " bootstrap " << b;
  }
}

TEST(Registry, ConditionalModelsRecycleCovariates) {
  for (const ExperimentSpec& e : registry()) {
    if (is_conditional(e.model)) {
      EXPECT_EQ(e.n, e.m) << e.id;
    }
  }
  ExperimentSpec bad = find_experiment("binary_misspec");
  bad.m = bad.n + 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Registry, OverridesAndReducedPower) {
  const ExperimentSpec s = small_location(10);
  EXPECT_EQ(s.reps, 10);
  EXPECT_THROW(apply_overrides(s, {{"rep", "3"}}), std::invalid_argument);
  EXPECT_THROW(apply_overrides(s, {{"reps", "3x"}}), std::invalid_argument);
  EXPECT_THROW(apply_overrides(s, {{"reps", "0"}}), std::invalid_argument);
  EXPECT_EQ(apply_overrides(s, {{"train.optimizer", "full_batch_adam"}}).train.optimizer, TrainOptimizer::full_batch_adam);
  const ExperimentResult r = run_experiment(s, 1, {"mle", "nesting"});
  EXPECT_TRUE(r.reduced_power);
  EXPECT_EQ(r.reps, 10);
  EXPECT_EQ(r.summaries.size(), 2u);
  EXPECT_EQ(r.summaries.at("mle").replications(), 10);
}

TEST(Registry, ScorecardIsDeterministicAcrossJobs) {
  const ExperimentSpec s = small_location(6);
  const ExperimentResult a = run_experiment(s, 1, {"mle", "oracle", "nesting"});
  const ExperimentResult b = run_experiment(s, 2, {"mle", "oracle", "nesting"});
  ASSERT_EQ(a.scorecard.size(), b.scorecard.size());
  for (std::size_t i = 0; i < a.scorecard.size(); ++i) {
    const double va = a.scorecard[i].value, vb = b.scorecard[i].value;
    EXPECT_TRUE(va == vb || (std::isnan(va) && std::isnan(vb))) << a.scorecard[i].target.name;
    EXPECT_EQ(a.scorecard[i].pass, b.scorecard[i].pass);
  }
  for (const auto& [label, sum] : a.summaries) EXPECT_EQ(sum.draws, b.summaries.at(label).draws) << label;
  // Targets whose estimators were not run are reported as failures with a reason.
  bool saw_missing = false;
  for (const auto& t : a.scorecard) {
    if (t.target.a == "mlp") {
      saw_missing = true;
      EXPECT_FALSE(t.pass);
      EXPECT_FALSE(t.error.empty());
    }
  }
  EXPECT_TRUE(saw_missing);
  EXPECT_EQ(experiment_result_json(a).dump(), experiment_result_json(b).dump());
}

TEST(Registry, ReplicationDataStreams) {
  const ExperimentSpec s = find_experiment("binary_misspec");
  const auto [r1, l1] = replication_data(s, replication_stream(s.seed, 0));
  const auto [r2, l2] = replication_data(s, replication_stream(s.seed, 0));
  const auto [r3, l3] = replication_data(s, replication_stream(s.seed, 1));
  EXPECT_EQ(r1, r2);
  EXPECT_EQ(l1.matrix(), l2.matrix());
  EXPECT_FALSE(r1 == r3);
  EXPECT_EQ(r1.n(), s.n);
  EXPECT_EQ(l1.m(), s.m);
  EXPECT_EQ(r1.names(), (std::vector<std::string>{"y", "x"}));
}

TEST(Registry, RunRosterReportsPerEntryErrors) {
  ExperimentSpec s = find_experiment("ii_compare");
  s.n = s.m = 40;  // tiny samples make high-degree probits separate
  const auto [real, latent] = replication_data(s, replication_stream(1, 0));
  std::map<std::string, std::string> errors;
  const auto reports = run_roster(s, real, latent, RngStream(1), {}, &errors);
  EXPECT_FALSE(reports.empty());
  for (const auto& [label, msg] : errors) {
    EXPECT_FALSE(msg.empty());
    EXPECT_FALSE(reports.count(label));
  }
  EXPECT_TRUE(reports.count("mle"));
}

// ------------------------------------------------------------------ config

TEST(Config, RegistryRoundTripsThroughJson) {
  for (const ExperimentSpec& e : registry()) {
    RunConfig c;
    c.experiment = e;
    c.jobs = 3;
    c.only = {e.roster.front().label};
    c.surface = {"theta", -0.5, 0.5, 11, ""};
    const std::string text = emit_run_config(c);
    const RunConfig back = parse_run_config(text);
    EXPECT_EQ(back.experiment, e) << e.id;
    EXPECT_EQ(back, c) << e.id;
    EXPECT_EQ(emit_run_config(back), text) << e.id;
  }
}

TEST(Config, StringExperimentResolvesToRegistry) {
  const RunConfig c = parse_run_config(R"({"schema_version": 1, "experiment": "roy_full", "jobs": 2})");
  EXPECT_EQ(c.experiment, find_experiment("roy_full"));
  EXPECT_EQ(c.jobs, 2);
  const RunConfig partial = parse_run_config(
      R"({"schema_version": 1, "experiment": {"id": "logistic_location", "reps": 20, "seed": 5}})");
  EXPECT_EQ(partial.experiment.reps, 20);
  EXPECT_EQ(partial.experiment.seed, 5u);
  EXPECT_EQ(partial.experiment.roster, find_experiment("logistic_location").roster);
}

TEST(Config, MisspelledKeysAreNamed) {
  EXPECT_NE(config_error(R"({"schema_version": 1, "jbos": 2})").find("$.jbos"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "experiment": {"id": "normal_misspec", "trian": {}}})")
                .find("$.experiment.trian"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "experiment": {"id": "normal_misspec", "train": {"mlp_itres": 3}}})")
                .find("mlp_itres"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "surface": {"points": 5, "coord": "mu1"}})").find("$.surface.coord"),
            std::string::npos);
}

TEST(Config, InvalidDocumentsAreRejected) {
  EXPECT_NE(config_error(R"({"experiment": "logistic_location"})").find("schema_version"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 2})").find("unsupported"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "experiment": "nope"})").find("nope"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "only": ["nobody"]})").find("nobody"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "jobs": 0})").find("jobs"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "jobs": "two"})").find("$.jobs"), std::string::npos);
  EXPECT_NE(config_error("{not json"), "");
  EXPECT_NE(config_error(R"({"schema_version": 1, "experiment": {"id": "normal_misspec", "reps": 0}})"), "");
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SampleConfigsParse) {
  const std::filesystem::path dir = std::filesystem::path(ADVEST_SOURCE_DIR) / "configs";
  int count = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (f.path().extension() != ".json") continue;
    ++count;
    const RunConfig c = load_run_config(f.path().string());
    EXPECT_EQ(parse_run_config(emit_run_config(c)), c) << f.path();
  }
  EXPECT_GE(count, 3);
}

// ---------------------------------------------------------------------- io

TEST(Io, DoublesRoundTripAtSeventeenDigits) {
  RngStream r(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = r.normal() * std::pow(10.0, static_cast<double>(r.below(40)) - 20.0);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(format_double(-kInf), "-inf");
  EXPECT_TRUE(config_detail::num(std::nan("")).is_string());
}

TEST(Io, CsvQuotingRoundTrip) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  CsvWriter w({"name", "value"});
  w.row_strings({"a,b", "line\nbreak"});
  w.row({1.5}, {"x"});
  EXPECT_THROW(w.row_strings({"only one"}), std::invalid_argument);
  const std::string text = w.str();
  EXPECT_NE(text.find("\r\n"), std::string::npos);
  const auto rows = parse_csv(text);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "a,b");
  EXPECT_EQ(rows[1][1], "line\nbreak");
  EXPECT_EQ(rows[2][1], "1.5");
}

TEST(Io, DatasetCsvRoundTrip) {
  const ExperimentSpec s = find_experiment("roy_fixed_rhot");
  const auto [real, latent] = replication_data(s, RngStream(4));
  const Dataset back = read_dataset_csv(s.model, dataset_csv(real));
  EXPECT_EQ(back, real);
  GeneratorSpec bin;
  bin.model = ModelId::binary_choice;
  // Column order in the file does not matter; extras are ignored.
  const Dataset d = read_dataset_csv(bin, "x,extra,y\n0.5,9,1\n-1,9,0\n");
  EXPECT_EQ(d.names(), (std::vector<std::string>{"y", "x"}));
  EXPECT_EQ(d(0, 0), 1.0);
  EXPECT_EQ(d(1, 1), -1.0);
  EXPECT_THROW(read_dataset_csv(bin, "x\n1\n"), std::invalid_argument);
  EXPECT_THROW(read_dataset_csv(bin, "y,x\n1,abc\n"), std::invalid_argument);
  EXPECT_THROW(read_dataset_csv(bin, "y,x\n1,nan\n"), std::invalid_argument);
  EXPECT_THROW(read_dataset_csv(bin, "y,x\n1\n"), std::invalid_argument);
  EXPECT_THROW(read_dataset_csv(bin, "y,x\n"), std::invalid_argument);
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
  const auto dir = std::filesystem::temp_directory_path() / "advest_io_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "file.txt";
  write_atomic(path, "one");
  write_atomic(path, "two");
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, "two");
  EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "file.txt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(Io, SummaryWriters) {
  Mat d(3, 1);
  d << 0.1, std::nan(""), 0.3;
  const McSummary s = summarize({"theta"}, d, {true, false, true}, 100, {"replication 1: failed"});
  const auto rows = parse_csv(draws_csv(s, "nesting"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"estimator", "replication", "ok", "theta"}));
  EXPECT_EQ(rows[2][2], "0");
  EXPECT_EQ(rows[2][3], "nan");
  const Json j = summary_json(s);
  EXPECT_EQ(j["failures"], 1);
  EXPECT_NEAR(j["coordinates"]["theta"]["mean"].get<double>(), 0.2, 1e-15);
  EXPECT_NEAR(j["coordinates"]["theta"]["sqrt_n_sd"].get<double>(), 10.0 * std::sqrt(0.02), 1e-12);

  LossSurface surf;
  surf.coordinate = "mu1";
  surf.grid = {1.0, 2.0};
  surf.profiled = {-1.2, -1.3};
  surf.loglik = {kInf, 3.0};
  surf.supported = {false, true};
  const auto srows = parse_csv(surface_csv(surf));
  ASSERT_EQ(srows.size(), 3u);
  EXPECT_EQ(srows[1][3], "inf");
  EXPECT_EQ(srows[1][4], "0");
  EXPECT_EQ(srows[2][2], "");
}
