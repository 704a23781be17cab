#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "mancon/mancon.hpp"

using namespace mancon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mancon_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

RunConfig small_config(std::uint64_t seed = 1) {
  RunConfig c = protocol_config(Manifold::stiefel(10, 2), GraphKind::Random, Method::RgdQR, StepSize::unit(), 1, seed);
  c.graph.n = 6;
  c.max_iters = 40;
  return c;
}

}  // namespace

TEST(Format, RoundTripsDoubles) {
  for (double v : {0.1, 1.0 / 3, 2e-16, 123456.789, -7.25e-300}) EXPECT_EQ(std::stod(io::fmt(v)), v);
  EXPECT_EQ(io::fmt(0.5), "0.5");
  EXPECT_TRUE(io::num(std::nan("")).is_null());
}

TEST(Trajectory, CsvHeaderAndRows) {
  const Trajectory tr = run(small_config());
  const auto ls = lines(io::trajectory_csv(tr));
  ASSERT_EQ(ls.size(), tr.records.size() + 1);
  EXPECT_EQ(ls[0], "iter,objective,euclid_err,manifold_err,finf_err,normalized_err,rgrad_norm,mean_drift");
  EXPECT_EQ(ls[1].substr(0, 2), "0,");
  // Each row has eight fields; the last row's mean drift is undefined.
  for (std::size_t i = 1; i < ls.size(); ++i) EXPECT_EQ(std::count(ls[i].begin(), ls[i].end(), ','), 7);
  EXPECT_NE(ls.back().find("nan"), std::string::npos);
}

TEST(Trajectory, MetadataEchoesResolvedConfig) {
  RunConfig c = small_config();
  c.alpha = StepSize::optimal();
  const Trajectory tr = run(c);
  const io::Json j = io::trajectory_metadata(tr, try_estimate_rate(tr));
  EXPECT_EQ(j["config"]["manifold"]["name"], "stiefel(10,2)");
  EXPECT_EQ(j["config"]["graph"]["n"], 6);
  EXPECT_EQ(j["config"]["init_seed"], 1);
  EXPECT_EQ(j["alpha_source"], "t=1 spectrum");
  EXPECT_DOUBLE_EQ(j["alpha_resolved"].get<double>(), tr.spectral_t1.alpha_opt);
  EXPECT_EQ(j["terminal_reason"], to_string(tr.terminal_reason));
  EXPECT_TRUE(j.contains("theory"));
  EXPECT_TRUE(j["config"].contains("tol_applies_to"));
}

TEST(WriteAtomic, ReplacesContentWithoutLeftovers) {
  const fs::path dir = scratch("atomic");
  const fs::path f = dir / "nested" / "out.txt";
  io::write_atomic(f, "first");
  io::write_atomic(f, "second");
  EXPECT_EQ(slurp(f), "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(f.parent_path())) ++entries;
  EXPECT_EQ(entries, 1);
  fs::remove_all(dir);
}

TEST(Parsing, NamesAndSteps) {
  EXPECT_EQ(parse_method("pgd"), Method::Pgd);
  EXPECT_EQ(parse_method("rgd-polar"), Method::RgdPolar);
  EXPECT_EQ(parse_graph_kind("cycle"), GraphKind::Cycle);
  EXPECT_EQ(make_manifold("oblique", 7, 3).name(), "oblique(7,3)");
  EXPECT_EQ(parse_step("1").kind, StepSize::Kind::Unit);
  EXPECT_EQ(parse_step("two-over-l-plus-mu").kind, StepSize::Kind::TwoOverLPlusMu);
  EXPECT_DOUBLE_EQ(parse_step("0.25").value, 0.25);
  for (const char* bad : {"-1", "0", "abc", "1.5x", "inf"}) EXPECT_THROW(parse_step(bad), Error) << bad;
  EXPECT_THROW(parse_method("sgd"), Error);
  EXPECT_THROW(parse_graph_kind("grid"), Error);
  EXPECT_THROW(make_manifold("torus", 3, 1), Error);
}

TEST(Suites, BuiltinSizesAndPairing) {
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const ExperimentSuite f2 = builtin_suite("figure2", seeds);
  EXPECT_EQ(f2.runs.size(), 27u);
  for (const char* name : {"figure3", "figure4", "figure5", "figure6"}) {
    const ExperimentSuite s = builtin_suite(name, seeds);
    EXPECT_EQ(s.runs.size(), 18u) << name;
    s.require_unique_names();
  }
  f2.require_unique_names();
  EXPECT_EQ(builtin_suite("figure5", {1}).runs.front().config.manifold.name(), "oblique(200,5)");
  // Every run sharing a seed shares the graph and the initial stack.
  for (const auto& r : f2.runs) {
    EXPECT_EQ(r.config.graph.seed, r.config.init_seed);
    EXPECT_EQ(r.config.graph.n, 15);
    EXPECT_DOUBLE_EQ(r.config.graph.p, 0.5);
  }
  EXPECT_THROW(builtin_suite("figure9", seeds), Error);
}

TEST(Suites, RunNames) {
  RunConfig c = protocol_config(Manifold::stiefel(200, 2), GraphKind::Star, Method::Pgd, StepSize::optimal(), 1, 3);
  EXPECT_EQ(run_name(c, false), "star-pgd-aopt-t1-s3");
  EXPECT_EQ(run_name(c, true).rfind("stiefel-", 0), 0u);
}

TEST(Suites, DuplicateNamesRejected) {
  ExperimentSuite s;
  s.runs = {{"a", small_config()}, {"a", small_config()}};
  EXPECT_THROW(s.require_unique_names(), Error);
}

TEST(Suites, GridFromJson) {
  const io::Json j = io::Json::parse(R"({"name": "mine",
      "manifolds": [{"kind": "sphere", "d": 4}, {"kind": "stiefel", "d": 6, "r": 2}],
      "graphs": ["star", "cycle"], "methods": ["pgd"], "alphas": ["1", 0.5], "ts": [1, 2],
      "n": 5, "max_iters": 30})");
  const ExperimentSuite s = suite_from_json(j, {7});
  EXPECT_EQ(s.name, "mine");
  EXPECT_EQ(s.runs.size(), 16u);
  s.require_unique_names();
  for (const auto& r : s.runs) {
    EXPECT_EQ(r.config.graph.n, 5);
    EXPECT_EQ(r.config.max_iters, 30);
    EXPECT_EQ(r.config.init_seed, 7u);
  }
}

TEST(Suites, EmptyOrMalformedGridRejected) {
  const io::Json empty = io::Json::parse(
      R"({"manifolds": [{"kind": "sphere", "d": 4}], "graphs": [], "methods": ["pgd"], "alphas": ["1"], "ts": [1]})");
  try {
    suite_from_json(empty, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
  EXPECT_THROW(suite_from_json(io::Json::parse(R"({"graphs": ["star"]})"), {1}), Error);
  EXPECT_THROW(suite_from_json(io::Json::parse("[1, 2]"), {1}), Error);
}

TEST(Suites, RunSuiteKeepsOrderAndWritesArtifacts) {
  const fs::path dir = scratch("suite");
  ExperimentSuite s;
  s.name = "tiny";
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    RunConfig c = small_config(seed);
    c.method = seed % 2 ? Method::Pgd : Method::RgdPolar;
    s.runs.push_back({run_name(c, false), c});
  }
  std::set<std::string> reported;
  const auto results = run_suite(s, dir, 4, [&](const SuiteResult& r) { reported.insert(r.name); });
  ASSERT_EQ(results.size(), s.runs.size());
  EXPECT_EQ(reported.size(), s.runs.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].name, s.runs[i].name);
    EXPECT_TRUE(results[i].ok) << results[i].message;
    EXPECT_TRUE(fs::exists(dir / (s.runs[i].name + ".csv")));
    EXPECT_TRUE(fs::exists(dir / (s.runs[i].name + ".json")));
  }
  // Parallel and sequential execution produce identical artifacts.
  const fs::path seq = scratch("suite_seq");
  run_suite(s, seq, 1);
  for (const auto& r : s.runs) EXPECT_EQ(slurp(dir / (r.name + ".csv")), slurp(seq / (r.name + ".csv")));
  const auto summary = lines(suite_summary_csv(results));
  EXPECT_EQ(summary.size(), results.size() + 1);
  EXPECT_EQ(summary[0].rfind("name,manifold,graph,method", 0), 0u);
  fs::remove_all(dir);
  fs::remove_all(seq);
}

TEST(Suites, ExecuteRunReportsErrorsWithoutThrowing) {
  RunConfig c = small_config();
  c.graph = {GraphKind::Random, 40, 0.01, 5};  // disconnected
  const SuiteResult r = execute_run({"bad", c}, {});
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.message.find("connected"), std::string::npos);
}

TEST(Report, JsonAndTable) {
  ValidateOptions opt;
  opt.samples = 50;
  const MixingMatrix w = metropolis_weights(build_graph({GraphKind::Star, 6})).with_power(3);
  const RegularityReport rep = validate(Manifold::sphere(5), w, opt);
  const io::Json j = io::to_json(rep);
  EXPECT_EQ(j["manifold"], "sphere(5)");
  EXPECT_EQ(j["inequalities"].size(), rep.records.size());
  EXPECT_EQ(j["total_violations"], 0);
  for (const auto& r : j["inequalities"]) {
    EXPECT_TRUE(r.contains("statement"));
    EXPECT_EQ(r["samples_tested"].get<int>() + r["hypothesis_failed"].get<int>(), 50);
  }
  const std::string table = io::report_table(rep);
  for (const auto& r : rep.records) EXPECT_NE(table.find(r.name), std::string::npos);
}
