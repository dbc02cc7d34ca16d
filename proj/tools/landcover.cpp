// landcover: command-line driver for the land-cover pipeline.
//
//   landcover <prepare-data|fetch|train|evaluate|calibrate|predict|report> --config <path> [overrides]

#include <CLI11.hpp>

#include <iostream>

#include "landcover/error.hpp"
#include "landcover/pipeline.hpp"

namespace fs = std::filesystem;
using namespace landcover;

int main(int argc, char** argv) {
  CLI::App app{"Multi-label land-cover pipeline: corpus preparation, tile fetching, training, evaluation, "
               "threshold calibration, tile inference and distribution reports."};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> profile;
  std::optional<double> threshold;
  std::optional<int> epochs;
  std::optional<std::string> checkpoint;
  std::vector<std::string> report_files;
  bool charts = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Pipeline config (JSON)")->required();
    sub->add_option("--set", overrides, "Override a config value, e.g. --set training.epochs=3");
  };

  auto* prepare = app.add_subcommand("prepare-data", "Load the labeled corpus and write its class distribution");
  auto* fetch = app.add_subcommand("fetch", "Fetch satellite tiles for every address into the cache");
  auto* train = app.add_subcommand("train", "Train each configured backbone profile");
  auto* evaluate = app.add_subcommand("evaluate", "Score checkpoints and render the comparison table");
  auto* calibrate = app.add_subcommand("calibrate", "Sweep thresholds and store the best in the manifest");
  auto* predict = app.add_subcommand("predict", "Classify cached tiles");
  auto* report = app.add_subcommand("report", "Aggregate predictions into share/frequency tables");
  for (auto* sub : {prepare, fetch, train, evaluate, calibrate, predict, report}) add_common(sub);

  train->add_option("--epochs", epochs, "Epochs per profile");
  evaluate->add_option("--reports", report_files, "Render these MetricsReport JSON files instead of evaluating");
  for (auto* sub : {train, evaluate, calibrate, predict}) {
    sub->add_option("--profile", profile, "Backbone profile");
  }
  for (auto* sub : {calibrate, predict}) sub->add_option("--checkpoint", checkpoint, "Checkpoint manifest or weights");
  predict->add_option("--threshold", threshold, "Decision threshold (overrides the manifest)")
      ->check(CLI::Range(0.0, 1.0));
  report->add_flag("--charts", charts, "Also render SVG charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (profile) {
      overrides.push_back("profile=\"" + *profile + "\"");
      if (train->parsed() || evaluate->parsed()) overrides.push_back("training.profiles=[\"" + *profile + "\"]");
    }
    if (epochs) overrides.push_back("training.epochs=" + std::to_string(*epochs));
    if (threshold) overrides.push_back("threshold=" + std::to_string(*threshold));
    if (checkpoint) overrides.push_back("checkpoint=\"" + *checkpoint + "\"");
    if (charts) overrides.push_back("report.charts=true");

    auto config = load_pipeline_config(config_path, overrides);
    if (prepare->parsed()) cmd_prepare_data(config);
    else if (fetch->parsed()) cmd_fetch(config);
    else if (train->parsed()) cmd_train(config);
    else if (evaluate->parsed()) {
      std::vector<fs::path> files(report_files.begin(), report_files.end());
      cmd_evaluate(config, files);
    } else if (calibrate->parsed()) cmd_calibrate(config);
    else if (predict->parsed()) cmd_predict(config);
    else if (report->parsed()) cmd_report(config);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
