#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ard/pipeline.hpp"

using namespace ard;
namespace fs = std::filesystem;

namespace {

RunConfig config_for(const std::string& name, std::size_t boxes = 256) {
  RunConfig cfg;
  cfg.map_file = std::string(ARD_MAPS_DIR) + "/" + name + ".json";
  cfg.n_boxes = boxes;
  cfg.samples = 400;
  return cfg;
}

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("ard_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

void expect_all_suites_once(const Report& rep) {
  ASSERT_EQ(rep.suites.size(), suite_names().size());
  for (std::size_t i = 0; i < rep.suites.size(); ++i) EXPECT_EQ(rep.suites[i].name, suite_names()[i]);
}

void expect_all_pass(const Report& rep) {
  for (const auto& s : rep.suites) EXPECT_TRUE(s.passed) << s.name << ": " << s.note;
  EXPECT_TRUE(rep.errors.empty());
  EXPECT_TRUE(rep.passed());
}

}  // namespace

TEST(Config, Defaults) {
  RunConfig cfg;
  EXPECT_EQ(cfg.n_boxes, 256u);
  EXPECT_EQ(cfg.max_depth, 8u);
  EXPECT_EQ(cfg.series_horizon, 40u);
  EXPECT_EQ(cfg.sup_horizon, 200u);
  EXPECT_EQ(cfg.max_return, 64u);
}

TEST(Config, Validation) {
  RunConfig cfg;
  cfg.n_boxes = 100;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.n_boxes = 256;
  cfg.samples = 0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg.samples = 10;
  cfg.sup_horizon = 10;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Config, MissingMapIsIoError) {
  RunConfig cfg;
  cfg.map_file = "/nonexistent/map.json";
  EXPECT_THROW(run_pipeline(cfg), IoError);
}

TEST(Golden, Square) {
  Report rep = run_pipeline(config_for("x2"));
  expect_all_suites_once(rep);
  expect_all_pass(rep);
  auto j = rep.to_json();
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_TRUE(j["generated_at"].is_null());
  EXPECT_EQ(j["chain"]["level_count"], 1);
  EXPECT_EQ(j["chain"]["status"], "decomposed");
  EXPECT_EQ(j["chain"]["levels"].size(), 1u);
  EXPECT_EQ(j["chain"]["levels"][0]["overlap"].size(), 0u);
  EXPECT_TRUE(j["renormalization"].is_null());
  EXPECT_FALSE(j["lyapunov"]["degenerate"].get<bool>());
  EXPECT_EQ(rep.suite("renorm_consistency")->applicable, false);
}

TEST(Golden, DoublingIsTransitive) {
  Report rep = run_pipeline(config_for("doubling"));
  expect_all_suites_once(rep);
  expect_all_pass(rep);
  auto j = rep.to_json();
  EXPECT_EQ(j["chain"]["status"], "transitive");
  EXPECT_TRUE(j["chain"]["levels"].is_array());
  EXPECT_EQ(j["chain"]["levels"].size(), 0u);
  EXPECT_TRUE(j["lyapunov"]["degenerate"].get<bool>());
  EXPECT_EQ(j["lyapunov"]["v_max"], 0.0);
  EXPECT_FALSE(j["renormalization"]["found"].get<bool>());
}

TEST(Golden, LorenzRenormalizable) {
  Report rep = run_pipeline(config_for("lorenz_beta13", 512));
  expect_all_suites_once(rep);
  expect_all_pass(rep);
  auto j = rep.to_json();
  EXPECT_EQ(j["chain"]["level_count"], 1);
  ASSERT_TRUE(j["renormalization"]["found"].get<bool>());
  EXPECT_NEAR(j["renormalization"]["a1"].get<double>(), 0.35, 1e-12);
  EXPECT_NEAR(j["renormalization"]["b1"].get<double>(), 0.65, 1e-12);
  EXPECT_EQ(j["renormalization"]["l"], 2);
  EXPECT_EQ(j["renormalization"]["r"], 2);
  EXPECT_TRUE(rep.suite("renorm_consistency")->applicable);
  EXPECT_TRUE(rep.suite("first_return")->applicable);
}

TEST(Golden, Sqrt2HasNoRenormalization) {
  Report rep = run_pipeline(config_for("sqrt2_mod1"));
  expect_all_suites_once(rep);
  expect_all_pass(rep);
  auto j = rep.to_json();
  EXPECT_EQ(j["chain"]["status"], "transitive");
  EXPECT_FALSE(j["renormalization"]["found"].get<bool>());
}

TEST(Pipeline, ModuleErrorsAreCaptured) {
  Report rep = run_pipeline(config_for("lorenz_beta115", 512));
  expect_all_suites_once(rep);
  ASSERT_FALSE(rep.errors.empty());
  EXPECT_EQ(rep.errors[0].stage, "decomposition");
  EXPECT_EQ(rep.errors[0].type, "resolution");
  EXPECT_FALSE(rep.passed());
}

TEST(Pipeline, Deterministic) {
  auto cfg = config_for("lorenz_beta13");
  EXPECT_EQ(report_text(run_pipeline(cfg), std::nullopt), report_text(run_pipeline(cfg), std::nullopt));
}

TEST(Emit, WritesAllOutputs) {
  auto dir = scratch_dir("outputs");
  auto cfg = config_for("x2");
  cfg.samples = 50;
  cfg.report_path = dir / "report.json";
  cfg.csv_path = dir / "v.csv";
  cfg.graph_dump_path = dir / "edges.txt";
  PiecewiseMap f = load_map(cfg.map_file);
  Report rep = run_pipeline(f, cfg);
  emit(rep, f, cfg, "2000-01-01T00:00:00Z");
  std::ifstream in(*cfg.report_path);
  auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["generated_at"], "2000-01-01T00:00:00Z");
  EXPECT_EQ(j["passed"], true);
  EXPECT_EQ(line_count(*cfg.csv_path), 52u);
  EXPECT_GT(line_count(*cfg.graph_dump_path), 256u);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
  fs::remove_all(dir);
}

TEST(Emit, UnwritablePathFailsBeforeWriting) {
  auto dir = scratch_dir("unwritable");
  auto cfg = config_for("x2");
  cfg.samples = 20;
  cfg.csv_path = dir / "v.csv";
  cfg.report_path = dir / "missing" / "report.json";
  PiecewiseMap f = load_map(cfg.map_file);
  Report rep = run_pipeline(f, cfg);
  EXPECT_THROW(emit(rep, f, cfg), IoError);
  EXPECT_FALSE(fs::exists(*cfg.csv_path));
  EXPECT_FALSE(fs::exists(*cfg.report_path));
  fs::remove_all(dir);
}
