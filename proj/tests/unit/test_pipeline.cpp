#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hedseg/config.hpp"
#include "hedseg/error.hpp"
#include "hedseg/log.hpp"
#include "hedseg/pipeline.hpp"

using namespace hedseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hedseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny() {
  RunConfig c = RunConfig::defaults(Profile::Toy);
  c.seed = 11;
  c.phantoms.count = 16;
  c.phantoms.image_size = 64;
  c.phantoms.slices_per_patient = 2;
  c.split = {4, 2, -1};
  c.hed = HedConfig::toy(64);
  c.hed_iterations = 3;
  c.detector = DetectorConfig::toy(64);
  c.seg_epochs = 1;
  c.eval_overlays = false;
  return c;
}

}  // namespace

TEST(Stages, NamesRoundTrip) {
  for (Stage s : all_stages()) EXPECT_EQ(parse_stage(to_string(s)), s);
  EXPECT_EQ(to_string(Stage::TrainHed), "train-hed");
  EXPECT_THROW(parse_stage("deploy"), Error);
}

TEST(Stages, Prerequisites) {
  const auto eval = prerequisites(Stage::Eval, true);
  EXPECT_NE(std::find(eval.begin(), eval.end(), Stage::Infer), eval.end());
  const auto fuse_base = prerequisites(Stage::Fuse, false);
  EXPECT_EQ(std::find(fuse_base.begin(), fuse_base.end(), Stage::Edges), fuse_base.end());
  const auto fuse = prerequisites(Stage::Fuse, true);
  EXPECT_NE(std::find(fuse.begin(), fuse.end(), Stage::Edges), fuse.end());
}

TEST(Pipeline, EvalAloneReportsMissingInfer) {
  const fs::path dir = temp_dir("missing");
  try {
    run_pipeline(tiny(), dir, {Stage::Eval});
    FAIL() << "expected missing_stage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing_stage");
    EXPECT_NE(std::string(e.what()).find("missing stage: infer"), std::string::npos);
  }
}

TEST(Pipeline, DetectionRecordRoundTrip) {
  DetectionRecord d{"P 1/3", 1, 0.8125, {1.5, 2, 30.25, 40}, "detections/P 1/3_0.png"};
  const DetectionRecord back = DetectionRecord::parse(d.format());
  EXPECT_EQ(back.slice_id, d.slice_id);
  EXPECT_EQ(back.score, d.score);
  EXPECT_EQ(back.box.x2, 30.25);
  EXPECT_EQ(back.mask, d.mask);
}

TEST(Pipeline, TinyRunIsDeterministicAndResumable) {
  log::set_level(log::Level::Warn);
  const fs::path a = temp_dir("run_a"), b = temp_dir("run_b");
  const RunConfig cfg = tiny();
  run_pipeline(cfg, a, all_stages());
  run_pipeline(cfg, b, all_stages());
  const std::string metrics = slurp(a / "report" / "metrics.csv");
  EXPECT_FALSE(metrics.empty());
  EXPECT_EQ(metrics, slurp(b / "report" / "metrics.csv"));
  EXPECT_EQ(slurp(a / "detections.txt"), slurp(b / "detections.txt"));

  const RunState state = RunState::read(a);
  EXPECT_EQ(state.config_hash, cfg.hash());
  for (Stage s : all_stages()) EXPECT_TRUE(state.done(s)) << to_string(s);
  EXPECT_EQ(RunConfig::load(a / "config.txt").hash(), cfg.hash());

  // Every slice gets a prediction.
  const Manifest slices = Manifest::read(a / "slices.txt");
  for (const auto& r : slices.records) EXPECT_TRUE(fs::exists(a / "preds" / r.patient / (std::to_string(r.index) + ".png")));

  // Re-running a stage invalidates the later ones.
  run_pipeline(cfg, a, {Stage::Postprocess});
  EXPECT_FALSE(RunState::read(a).done(Stage::Eval));
  run_pipeline(cfg, a, {Stage::Eval});
  EXPECT_EQ(slurp(a / "report" / "metrics.csv"), metrics);
}

TEST(Pipeline, BaselineSkipsEdgeStages) {
  log::set_level(log::Level::Warn);
  const fs::path dir = temp_dir("baseline");
  RunConfig cfg = tiny();
  cfg.fusion = false;
  run_pipeline(cfg, dir, {Stage::Convert, Stage::Enhance, Stage::Fuse});
  EXPECT_FALSE(RunState::read(dir).done(Stage::Edges));
  EXPECT_TRUE(RunState::read(dir).done(Stage::Fuse));
}

TEST(Pipeline, ReferenceNotesPresent) {
  const auto notes = reference_notes();
  ASSERT_GE(notes.size(), 2u);
  EXPECT_NE(notes[0].find("0.94±0.03"), std::string::npos);
}
