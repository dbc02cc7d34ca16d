#include "landcover/pipeline.hpp"

#include <fstream>
#include <iostream>

#include "landcover/csv.hpp"
#include "landcover/digest.hpp"
#include "landcover/error.hpp"
#include "landcover/inference.hpp"
#include "landcover/models.hpp"

namespace landcover {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const ArgumentError*>(&error)) return kExitUsage;
  if (dynamic_cast<const SchemaError*>(&error) || dynamic_cast<const LoadError*>(&error) ||
      dynamic_cast<const InputSizeError*>(&error) || dynamic_cast<const UndefinedAucError*>(&error)) {
    return kExitData;
  }
  return kExitRuntime;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve(const fs::path& base, const json& value) {
  fs::path p = value.get<std::string>();
  return p.is_absolute() || p.empty() ? p : base / p;
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(json doc, const fs::path& base_dir) {
  PipelineConfig c;
  c.snapshot = doc;
  try {
    const json paths = doc.value("paths", json::object());
    if (paths.contains("corpus_dir")) c.paths.corpus_dir = resolve(base_dir, paths["corpus_dir"]);
    if (paths.contains("labels")) c.paths.labels = resolve(base_dir, paths["labels"]);
    if (paths.contains("addresses")) c.paths.addresses = resolve(base_dir, paths["addresses"]);
    c.paths.cache_dir = resolve(base_dir, paths.value("cache_dir", json("cache")));
    c.paths.output_dir = resolve(base_dir, paths.value("output_dir", json("out")));

    const json cols = doc.value("address_columns", json::object());
    c.address_columns.record_id = cols.value("record_id", c.address_columns.record_id);
    c.address_columns.address_line = cols.value("address_line", c.address_columns.address_line);
    c.address_columns.city = cols.value("city", c.address_columns.city);
    c.address_columns.state = cols.value("state", c.address_columns.state);
    c.address_columns.postal_code = cols.value("postal_code", c.address_columns.postal_code);
    auto delim = doc.value("address_delimiter", std::string(","));
    if (delim == "\\t" || delim == "tab") delim = "\t";
    if (delim.size() != 1) throw ConfigError("address_delimiter must be a single character");
    c.address_delimiter = delim[0];

    if (doc.contains("service")) c.service = doc["service"].get<ServiceConfig>();
    const json campaign = doc.value("campaign", json::object());
    c.parallelism = campaign.value("parallelism", c.parallelism);
    c.rate_limit = campaign.value("rate_limit", c.rate_limit);

    const json split = doc.value("split", json::object());
    c.val_fraction = split.value("val_fraction", c.val_fraction);
    c.split_seed = split.value("seed", c.split_seed);

    const json training = doc.value("training", json::object());
    c.profiles = training.value("profiles", c.profiles);
    c.training.epochs = training.value("epochs", c.training.epochs);
    c.training.batch_size = training.value("batch_size", c.training.batch_size);
    if (training.contains("learning_rate") && !training["learning_rate"].is_null()) {
      c.training.learning_rate = training["learning_rate"].get<double>();
    }
    c.training.seed = training.value("seed", c.training.seed);
    c.training.input_size = training.value("input_size", c.training.input_size);
    c.training.freeze_backbone = training.value("freeze_backbone", c.training.freeze_backbone);
    c.pretrained = training.value("pretrained", c.pretrained);

    const json aug = doc.value("augmentation", json::object());
    c.augmentation.horizontal_flip = aug.value("horizontal_flip", c.augmentation.horizontal_flip);
    c.augmentation.vertical_flip = aug.value("vertical_flip", c.augmentation.vertical_flip);
    c.augmentation.rotations = aug.value("rotations", c.augmentation.rotations);

    const json evaluation = doc.value("evaluation", json::object());
    if (evaluation.contains("threshold") && !evaluation["threshold"].is_null()) {
      c.eval_threshold = evaluation["threshold"].get<double>();
    }
    c.table_format = parse_table_format(evaluation.value("table_format", std::string("text")));

    const json calibration = doc.value("calibration", json::object());
    c.sweep_grid = calibration.value("grid", c.sweep_grid);

    c.profile = doc.value("profile", c.profiles.empty() ? std::string("tiny_cnn") : c.profiles.front());
    if (doc.contains("checkpoint") && !doc["checkpoint"].is_null()) c.checkpoint = resolve(base_dir, doc["checkpoint"]);
    if (doc.contains("threshold") && !doc["threshold"].is_null()) c.threshold = doc["threshold"].get<double>();
    c.render_charts = doc.value("report", json::object()).value("charts", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // Validate early so every subcommand fails with a usage error, not midway.
  try {
    for (const auto& p : c.profiles) profile_by_name(p);
    profile_by_name(c.profile);
    c.augmentation.transforms();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.parallelism < 1) throw ConfigError("config: campaign.parallelism must be >= 1");
  if (!(c.rate_limit > 0.0)) throw ConfigError("config: campaign.rate_limit must be positive");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) throw ConfigError("config: split.val_fraction must lie in (0, 1)");
  if (c.training.epochs < 1) throw ConfigError("config: training.epochs must be >= 1");
  if (c.training.batch_size < 1) throw ConfigError("config: training.batch_size must be >= 1");
  if (c.sweep_grid.empty()) throw ConfigError("config: calibration.grid must not be empty");
  for (double t : c.sweep_grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("config: calibration.grid values must lie in [0, 1]");
  }
  for (auto t : {c.threshold, c.eval_threshold}) {
    if (t && !(*t >= 0.0 && *t <= 1.0)) throw ConfigError("config: thresholds must lie in [0, 1]");
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(csv::read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  for (const auto& item : overrides) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
    std::string pointer = "/" + item.substr(0, eq);
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    try {
      doc[json::json_pointer(pointer)] = parse_override_value(item.substr(eq + 1));
    } catch (const json::exception& e) {
      throw ConfigError("override '" + item + "': " + e.what());
    }
  }
  return pipeline_config_from_json(std::move(doc), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Helpers shared by the subcommands

namespace {

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config: ") + what + " path not set");
  if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config: ") + what + " path not set");
  if (!fs::is_directory(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

void write_json(const fs::path& path, const json& doc) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

/// Provenance record: config snapshot, digests of the input files, version.
void write_run_manifest(const PipelineConfig& config, std::string_view command, const std::vector<fs::path>& inputs) {
  json digests = json::object();
  for (const auto& p : inputs) {
    if (fs::is_regular_file(p)) digests[p.string()] = sha256_file(p);
  }
  write_json(config.paths.output_dir / "runs" / (std::string(command) + ".json"),
             {{"command", command}, {"tool_version", kToolVersion}, {"config", config.snapshot}, {"inputs", digests}});
}

Corpus load_training_corpus(const PipelineConfig& config) {
  require_dir(config.paths.corpus_dir, "corpus directory");
  require_file(config.paths.labels, "label file");
  return load_corpus(config.paths.corpus_dir, config.paths.labels);
}

fs::path models_dir(const PipelineConfig& config) { return config.paths.output_dir / "models"; }

fs::path best_checkpoint(const PipelineConfig& config, const std::string& profile) {
  return models_dir(config) / (profile + "_best.json");
}

/// Predictions of a checkpoint on the validation split it was trained with.
PredictionSet validation_predictions(LoadedModel& loaded, const Corpus& corpus) {
  if (LabelVocabulary(loaded.manifest.classes) != corpus.vocab) {
    throw SchemaError("checkpoint '" + loaded.manifest.model_name + "' was trained on a different vocabulary");
  }
  auto split = split_corpus(corpus.images.size(), loaded.manifest.val_fraction, loaded.manifest.split_seed);
  PredictionSet set;
  set.vocab = corpus.vocab;
  set.probabilities = predict_corpus(loaded.model, corpus, split.val, loaded.manifest.input_size);
  set.truth = LabelMatrix(split.val.size(), corpus.vocab.size());
  for (std::size_t r = 0; r < split.val.size(); ++r) {
    const auto& labels = corpus.images[split.val[r]].labels;
    std::copy(labels.begin(), labels.end(), set.truth.row(r).begin());
  }
  return set;
}

}  // namespace

fs::path selected_checkpoint(const PipelineConfig& config) {
  return config.checkpoint ? manifest_path_for(*config.checkpoint) : best_checkpoint(config, config.profile);
}

// ---------------------------------------------------------------------------
// Subcommands

CorpusSummary cmd_prepare_data(const PipelineConfig& config) {
  Corpus corpus = load_training_corpus(config);
  CorpusSummary summary;
  summary.n_images = corpus.images.size();
  summary.vocab = corpus.vocab;
  summary.counts = class_distribution(corpus.images, corpus.vocab);
  for (auto name : required_land_cover_classes()) {
    if (!corpus.vocab.contains(name)) summary.missing_required.emplace_back(name);
  }

  const auto out = config.paths.output_dir / "data";
  fs::create_directories(out);
  write_class_distribution_csv(out / "class_distribution.csv", corpus.vocab, summary.counts, summary.n_images);
  json counts = json::object();
  for (std::size_t c = 0; c < corpus.vocab.size(); ++c) counts[corpus.vocab.name(c)] = summary.counts[c];
  write_json(out / "corpus_summary.json", {{"images", summary.n_images},
                                           {"classes", corpus.vocab.classes()},
                                           {"counts", counts},
                                           {"missing_required_classes", summary.missing_required}});
  write_run_manifest(config, "prepare-data", {config.paths.labels});

  std::cout << "corpus: " << summary.n_images << " images, " << corpus.vocab.size() << " classes\n";
  for (std::size_t c = 0; c < corpus.vocab.size(); ++c) {
    std::cout << "  " << corpus.vocab.name(c) << ": " << summary.counts[c] << '\n';
  }
  if (!summary.missing_required.empty()) {
    std::cout << "note: vocabulary lacks";
    for (const auto& n : summary.missing_required) std::cout << ' ' << n;
    std::cout << '\n';
  }
  return summary;
}

FetchLedger cmd_fetch(const PipelineConfig& config, MapService* service) {
  require_file(config.paths.addresses, "address file");
  auto records = load_property_records(config.paths.addresses, config.address_columns, config.address_delimiter);
  std::unique_ptr<MapService> owned;
  if (!service) {
    owned = std::make_unique<HttpMapService>(config.service);
    service = owned.get();
  }
  TileCache cache(config.paths.cache_dir);
  CampaignOptions options{config.service, config.parallelism, config.rate_limit};
  auto ledger = run_fetch_campaign(records, *service, cache, options);
  auto summary = ledger_summary(ledger);

  json by_reason = json::object();
  for (const auto& [reason, n] : summary.by_reason) by_reason[std::string(to_string(reason))] = n;
  write_json(config.paths.output_dir / "fetch" / "summary.json",
             {{"total", summary.total}, {"retrieved", summary.retrieved}, {"failed", summary.failed},
              {"by_reason", by_reason}, {"ledger", cache.ledger_path().string()}});
  write_run_manifest(config, "fetch", {config.paths.addresses});

  std::cout << "fetch: " << summary.total << " records, " << summary.retrieved << " retrieved, " << summary.failed
            << " failed, " << ledger.requests << " requests\n";
  for (const auto& [reason, n] : summary.by_reason) std::cout << "  " << to_string(reason) << ": " << n << '\n';
  return ledger;
}

std::vector<TrainingHistory> cmd_train(const PipelineConfig& config) {
  Corpus corpus = load_training_corpus(config);
  auto split = split_corpus(corpus.images.size(), config.val_fraction, config.split_seed);
  std::cout << "split: " << split.train.size() << " train, " << split.val.size() << " val\n";

  std::vector<TrainingHistory> histories;
  json summary = json::array();
  for (const auto& name : config.profiles) {
    const auto& profile = profile_by_name(name);
    auto model = build_model(profile, static_cast<std::int64_t>(corpus.vocab.size()),
                             config.pretrained && profile.pretrained_available, {config.training.seed, {}});
    TrainingConfig tc = config.training;
    tc.checkpoint_dir = models_dir(config);
    tc.model_name = profile.name;
    auto history = train(model, corpus, split, tc, config.augmentation);
    auto onset = detect_overfitting(history, 2);
    summary.push_back({{"model", history.model_name},
                       {"input_size", history.input_size},
                       {"best_epoch", history.best_epoch},
                       {"checkpoint", history.checkpoint_path.string()},
                       {"final_checkpoint", history.final_checkpoint_path.string()},
                       {"overfitting_onset", onset ? json(*onset) : json(nullptr)}});
    histories.push_back(std::move(history));
  }
  export_loss_curves(histories, config.paths.output_dir / "training" / "loss_curves.csv");
  write_json(config.paths.output_dir / "training" / "histories.json", summary);
  write_run_manifest(config, "train", {config.paths.labels});
  return histories;
}

std::vector<MetricsReport> cmd_evaluate(const PipelineConfig& config, const std::vector<fs::path>& report_files) {
  std::vector<MetricsReport> reports;
  const auto out = config.paths.output_dir / "evaluation";
  if (!report_files.empty()) {
    for (const auto& file : report_files) {
      require_file(file, "metrics report");
      try {
        reports.push_back(json::parse(csv::read_text(file)).get<MetricsReport>());
      } catch (const json::exception& e) {
        throw SchemaError("metrics report " + file.string() + ": " + e.what());
      }
    }
  } else {
    Corpus corpus = load_training_corpus(config);
    for (const auto& name : config.profiles) {
      auto manifest = best_checkpoint(config, name);
      require_file(manifest, "checkpoint manifest");
      auto loaded = load_checkpoint(manifest);
      auto preds = validation_predictions(loaded, corpus);
      double threshold = config.eval_threshold.value_or(loaded.manifest.threshold.value_or(0.5));
      auto report = compute_metrics(preds, threshold, loaded.manifest.model_name);
      write_json(out / (report.model_name + ".json"), report);
      reports.push_back(std::move(report));
    }
  }

  fs::create_directories(out);
  const char* ext = config.table_format == TableFormat::Csv ? "csv" : config.table_format == TableFormat::Latex ? "tex" : "txt";
  auto table = render_comparison_table(reports, config.table_format);
  std::ofstream(out / (std::string("comparison.") + ext)) << table;
  if (config.table_format != TableFormat::Csv) {
    std::ofstream(out / "comparison.csv") << render_comparison_table(reports, TableFormat::Csv);
  }
  std::vector<fs::path> inputs = report_files;
  inputs.push_back(config.paths.labels);
  write_run_manifest(config, "evaluate", inputs);
  std::cout << table;
  return reports;
}

ThresholdSweepResult cmd_calibrate(const PipelineConfig& config) {
  auto manifest_path = selected_checkpoint(config);
  require_file(manifest_path, "checkpoint manifest");
  Corpus corpus = load_training_corpus(config);
  auto loaded = load_checkpoint(manifest_path);
  auto sweep = sweep_thresholds(validation_predictions(loaded, corpus), config.sweep_grid);

  const auto out = config.paths.output_dir / "calibration";
  fs::create_directories(out);
  write_sweep_csv(out / "sweep.csv", sweep);
  write_json(out / "calibration.json", {{"checkpoint", manifest_path.string()},
                                        {"best_threshold", sweep.best_threshold},
                                        {"best_f1", sweep.best_f1}});
  loaded.manifest.threshold = sweep.best_threshold;
  write_manifest(loaded.manifest, manifest_path);
  write_run_manifest(config, "calibrate", {config.paths.labels, manifest_path});

  std::cout << "calibrate: best threshold " << sweep.best_threshold << " (F1 " << sweep.best_f1 << ") over "
            << sweep.grid.size() << " grid points\n";
  return sweep;
}

std::vector<PredictionRecord> cmd_predict(const PipelineConfig& config) {
  auto manifest_path = selected_checkpoint(config);
  require_file(manifest_path, "checkpoint manifest");
  TileCache cache(config.paths.cache_dir);
  require_file(cache.ledger_path(), "fetch ledger");
  auto ledger = load_ledger(cache.ledger_path());

  auto loaded = load_checkpoint(manifest_path);
  auto result = predict_tiles(loaded, config.paths.cache_dir, ledger, {config.threshold, 64});
  const auto out = config.paths.output_dir / "predictions";
  write_predictions(result.records, result.vocab, out);
  json skipped = json::array();
  for (const auto& s : result.skipped) skipped.push_back({{"record_id", s.record_id}, {"reason", s.reason}});
  write_json(out / "skipped.json", skipped);
  write_run_manifest(config, "predict", {manifest_path, cache.ledger_path()});

  std::cout << "predict: " << result.records.size() << " tiles classified with " << result.model_name
            << " at threshold " << result.threshold << ", " << result.skipped.size() << " skipped\n";
  return std::move(result.records);
}

AggregateDistribution cmd_report(const PipelineConfig& config) {
  auto predictions_path = config.paths.output_dir / "predictions" / "predictions.json";
  require_file(predictions_path, "predictions file");
  auto file = read_predictions_json(predictions_path);
  auto dist = aggregate(file.records, file.vocab);
  const auto out = config.paths.output_dir / "report";
  emit_chart_data(dist, out, config.render_charts);

  json counts = json::object();
  for (std::size_t c = 0; c < dist.vocab.size(); ++c) counts[dist.vocab.name(c)] = dist.per_class_count[c];
  write_json(out / "distribution.json", {{"n_images", dist.n_images},
                                         {"total_detections", dist.total_detections},
                                         {"shares_defined", dist.shares_defined},
                                         {"counts", counts}});
  write_run_manifest(config, "report", {predictions_path});
  std::cout << format_distribution(dist);
  return dist;
}

}  // namespace landcover
