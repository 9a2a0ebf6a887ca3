// hedseg: command line front end for the liver segmentation pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hedseg/config.hpp"
#include "hedseg/error.hpp"
#include "hedseg/eval.hpp"
#include "hedseg/log.hpp"
#include "hedseg/phantom.hpp"
#include "hedseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hedseg;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
  std::string profile;
  std::vector<std::string> sets;
  std::string log_level = "info";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Run configuration file (key = value)");
  app->add_option("--seed", c.seed, "Global seed (overrides the configuration)");
  app->add_option("--run-dir", c.run_dir, "Run directory (default runs/<name>)");
  app->add_option("--profile", c.profile, "Default profile: full or toy");
  app->add_option("--set", c.sets, "Override one configuration key: key=value")->take_all();
  app->add_option("--log-level", c.log_level, "debug, info, warn or error");
}

struct Resolved {
  RunConfig cfg;
  fs::path run_dir;
};

// defaults < file < command line
Resolved resolve(const Common& c, const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  kv::Document doc;
  std::string file = c.config;
  if (file.empty() && !c.run_dir.empty() && fs::exists(fs::path(c.run_dir) / layout::kConfig)) {
    file = (fs::path(c.run_dir) / layout::kConfig).string();
  }
  if (!file.empty()) doc = kv::Document::read(file);
  if (!c.profile.empty()) doc.set("profile", c.profile);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("invalid_argument", "--set expects key=value, got '" + s + "'");
    doc.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : extra) doc.set(k, v);
  if (c.seed) doc.set("seed", std::to_string(*c.seed));
  Resolved r{RunConfig::from_document(doc), {}};
  r.run_dir = c.run_dir.empty() ? fs::path("runs") / r.cfg.name : fs::path(c.run_dir);
  return r;
}

void set_log_level(const std::string& level) {
  if (level == "debug") log::set_level(log::Level::Debug);
  else if (level == "info") log::set_level(log::Level::Info);
  else if (level == "warn") log::set_level(log::Level::Warn);
  else if (level == "error") log::set_level(log::Level::Error);
  else throw Error("invalid_argument", "unknown log level '" + level + "'");
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

EvalReport load_report(const fs::path& p, bool population) {
  return read_metrics_csv(fs::is_directory(p) ? p / "metrics.csv" : p, population);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hedseg: edge-guided liver segmentation pipeline"};
  app.require_subcommand(1);
  Common common;

  // Stage commands sharing the run-directory workflow.
  struct StageCommand {
    const char* name;
    Stage stage;
    const char* help;
  };
  const std::vector<StageCommand> stage_commands{
      {"convert", Stage::Convert, "Import DICOM series, a manifest or phantoms into the run directory"},
      {"enhance", Stage::Enhance, "Contrast enhancement and training-set augmentation"},
      {"train-hed", Stage::TrainHed, "Train the edge network"},
      {"edges", Stage::Edges, "Compute edge maps with a trained edge network"},
      {"fuse", Stage::Fuse, "Multiply enhanced images by their edge maps"},
      {"train-seg", Stage::TrainSeg, "Train the instance segmentation detector"},
      {"infer", Stage::Infer, "Run the detector on every slice"},
      {"postprocess", Stage::Postprocess, "Reduce detections to one cleaned mask per slice"},
  };

  std::string source, masks, modality, enhance_modality, checkpoint;
  std::vector<std::pair<CLI::App*, Stage>> stage_apps;
  for (const auto& sc : stage_commands) {
    auto* sub = app.add_subcommand(sc.name, sc.help);
    add_common(sub, common);
    if (sc.stage == Stage::Convert) {
      sub->add_option("--source", source, "DICOM root (one directory per patient), manifest file, or 'phantoms'");
      sub->add_option("--masks", masks, "Mask root for DICOM input: <root>/<patient>/<index>.png");
      sub->add_option("--modality", modality, "Modality hint: ct, t1, t2 or auto");
    }
    if (sc.stage == Stage::Enhance) {
      sub->add_option("--modality", enhance_modality, "Force the enhancement branch")->check(CLI::IsMember({"ct", "mr", "auto"}));
    }
    if (sc.stage == Stage::Edges || sc.stage == Stage::Infer) {
      sub->add_option("--checkpoint", checkpoint, "Checkpoint to load instead of the run's own");
    }
    stage_apps.emplace_back(sub, sc.stage);
  }

  auto* eval = app.add_subcommand("eval", "Dice evaluation; run directory or --pred/--gt");
  add_common(eval, common);
  std::string pred_dir, gt_manifest, out_dir, method, split;
  eval->add_option("--pred", pred_dir, "Directory of predicted masks <patient>/<index>.png");
  eval->add_option("--gt", gt_manifest, "Ground-truth manifest");
  eval->add_option("--out", out_dir, "Output directory for metrics.csv and report.md");
  eval->add_option("--method", method, "Method name for the report rows");
  eval->add_option("--split", split, "Only score records of this split");

  auto* cmp = app.add_subcommand("compare", "Delta table between two evaluation reports");
  add_common(cmp, common);
  std::string report_a, report_b, cmp_out;
  cmp->add_option("a", report_a, "Report directory or metrics.csv (reference)")->required();
  cmp->add_option("b", report_b, "Report directory or metrics.csv")->required();
  cmp->add_option("--out", cmp_out, "Write the table here instead of stdout");

  auto* phantoms = app.add_subcommand("phantoms", "Write a synthetic phantom dataset");
  add_common(phantoms, common);
  std::string phantom_out;
  std::optional<int> phantom_count, phantom_size;
  phantoms->add_option("--out", phantom_out, "Output directory")->required();
  phantoms->add_option("--count", phantom_count, "Number of slices");
  phantoms->add_option("--size", phantom_size, "Image side length");

  auto* ablation = app.add_subcommand("ablation", "Baseline vs edge-fused variants with a comparison report");
  add_common(ablation, common);

  auto* run = app.add_subcommand("run", "Run every stage");
  add_common(run, common);
  bool resume = false;
  run->add_flag("--resume", resume, "Skip stages already completed under the same configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    set_log_level(common.log_level);

    for (const auto& [sub, stage] : stage_apps) {
      if (!sub->parsed()) continue;
      std::vector<std::pair<std::string, std::string>> extra;
      if (!source.empty()) extra.emplace_back("data.source", source);
      if (!masks.empty()) extra.emplace_back("data.masks", masks);
      if (!modality.empty()) extra.emplace_back("data.modality", modality);
      if (!enhance_modality.empty()) extra.emplace_back("enhance.modality", enhance_modality);
      if (!checkpoint.empty()) extra.emplace_back(stage == Stage::Edges ? "hed.checkpoint" : "seg.checkpoint", checkpoint);
      const auto r = resolve(common, extra);
      run_pipeline(r.cfg, r.run_dir, {stage});
      std::cout << r.run_dir.string() << '\n';
      return 0;
    }

    if (eval->parsed()) {
      if (!pred_dir.empty() || !gt_manifest.empty()) {
        if (pred_dir.empty() || gt_manifest.empty() || out_dir.empty()) {
          throw Error("invalid_argument", "eval needs --pred, --gt and --out together");
        }
        EvalOptions opts;
        if (!method.empty()) opts.method = method;
        if (!split.empty()) opts.split = split;
        const auto report = evaluate(pred_dir, gt_manifest, opts);
        write_report(report, out_dir);
        std::cout << format_report_markdown(report);
        return 0;
      }
      std::vector<std::pair<std::string, std::string>> extra;
      if (!method.empty()) extra.emplace_back("eval.method", method);
      if (!split.empty()) extra.emplace_back("eval.split", split);
      const auto r = resolve(common, extra);
      run_pipeline(r.cfg, r.run_dir, {Stage::Eval});
      std::ifstream in(r.run_dir / layout::kReport / "report.md");
      std::cout << in.rdbuf();
      return 0;
    }

    if (cmp->parsed()) {
      const auto c = compare(load_report(report_a, true), load_report(report_b, true));
      const std::string table = format_comparison_markdown(c);
      if (cmp_out.empty()) {
        std::cout << table;
      } else {
        if (fs::path(cmp_out).has_parent_path()) fs::create_directories(fs::path(cmp_out).parent_path());
        std::ofstream out(cmp_out);
        out << table;
        if (!out) throw Error("io", "cannot write '" + cmp_out + "'");
      }
      return 0;
    }

    if (phantoms->parsed()) {
      const auto r = resolve(common);
      PhantomSpec spec = r.cfg.phantoms;
      spec.seed = r.cfg.seed;
      if (phantom_count) spec.count = *phantom_count;
      if (phantom_size) spec.image_size = *phantom_size;
      const auto m = write_phantoms(spec, phantom_out);
      std::cout << (fs::path(phantom_out) / "manifest.txt").string() << " (" << m.records.size() << " slices)\n";
      return 0;
    }

    if (ablation->parsed()) {
      const auto r = resolve(common);
      const auto result = run_ablation(r.cfg, r.run_dir);
      std::cout << format_comparison_markdown(result.comparison);
      return 0;
    }

    if (run->parsed()) {
      const auto r = resolve(common);
      PipelineOptions opts;
      opts.skip_completed = resume;
      std::vector<Stage> stages;
      for (Stage s : all_stages()) {
        if (!r.cfg.fusion && (s == Stage::TrainHed || s == Stage::Edges)) continue;
        stages.push_back(s);
      }
      run_pipeline(r.cfg, r.run_dir, stages, opts);
      std::ifstream in(r.run_dir / layout::kReport / "report.md");
      std::cout << in.rdbuf();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: code=" << e.code() << " message=" << quote(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: code=internal message=" << quote(e.what()) << '\n';
    return 1;
  }
  return 0;
}
