#include <json.hpp>

#include "model/model.hpp"

namespace histograph::model {

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["accuracy"] = report.accuracy;
  doc["n"] = report.predictions.size();
  doc["class_counts"] = report.class_counts;
  doc["confusion"] = report.confusion;
  auto predictions = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.predictions.size(); ++i) {
    const auto& p = report.predictions[i];
    nlohmann::ordered_json entry;
    entry["index"] = i;
    entry["label"] = p.label;
    entry["predicted"] = p.predicted;
    entry["probabilities"] = p.probabilities;
    predictions.push_back(std::move(entry));
  }
  doc["predictions"] = std::move(predictions);
  return doc.dump(2);
}

}  // namespace histograph::model
