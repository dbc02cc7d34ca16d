#include "landcover/predictions.hpp"

#include <fstream>

#include "landcover/csv.hpp"
#include "landcover/error.hpp"

namespace landcover {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const PredictionRecord& r) {
  j = nlohmann::json{{"record_id", r.record_id},
                     {"probabilities", r.probabilities},
                     {"decisions", r.decisions},
                     {"threshold_used", r.threshold_used},
                     {"model_name", r.model_name}};
}

void from_json(const nlohmann::json& j, PredictionRecord& r) {
  j.at("record_id").get_to(r.record_id);
  j.at("probabilities").get_to(r.probabilities);
  j.at("decisions").get_to(r.decisions);
  j.at("threshold_used").get_to(r.threshold_used);
  j.at("model_name").get_to(r.model_name);
}

void write_predictions(std::span<const PredictionRecord> records, const LabelVocabulary& vocab,
                       const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& r : records) {
    if (r.probabilities.size() != vocab.size() || r.decisions.size() != vocab.size()) {
      throw SchemaError("write_predictions: record '" + r.record_id + "' does not match the vocabulary");
    }
  }

  std::ofstream table(out_dir / "predictions.csv");
  if (!table) throw LoadError("cannot write " + (out_dir / "predictions.csv").string());
  std::vector<std::string> header{"record_id"};
  for (const auto& name : vocab.classes()) {
    header.push_back("p_" + name);
    header.push_back("d_" + name);
  }
  csv::write_row(table, header);
  for (const auto& r : records) {
    std::vector<std::string> row{r.record_id};
    for (std::size_t c = 0; c < vocab.size(); ++c) {
      row.push_back(csv::format_double(r.probabilities[c]));
      row.push_back(r.decisions[c] ? "1" : "0");
    }
    csv::write_row(table, row);
  }

  nlohmann::json doc{{"classes", vocab.classes()}, {"records", nlohmann::json::array()}};
  for (const auto& r : records) doc["records"].push_back(r);
  std::ofstream json(out_dir / "predictions.json");
  if (!json) throw LoadError("cannot write " + (out_dir / "predictions.json").string());
  json << doc.dump(2) << '\n';
}

PredictionFile read_predictions_json(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("predictions file " + path.string() + ": " + e.what());
  }
  PredictionFile file;
  try {
    file.vocab = LabelVocabulary(doc.at("classes").get<std::vector<std::string>>());
    file.records = doc.at("records").get<std::vector<PredictionRecord>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("predictions file " + path.string() + ": " + e.what());
  }
  for (const auto& r : file.records) {
    if (r.probabilities.size() != file.vocab.size() || r.decisions.size() != file.vocab.size()) {
      throw SchemaError("predictions file " + path.string() + ": record '" + r.record_id +
                        "' does not match the vocabulary");
    }
  }
  return file;
}

}  // namespace landcover
