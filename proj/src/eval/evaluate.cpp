#include "grounding/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grounding/core/errors.hpp"
#include "grounding/data/batch.hpp"

namespace grounding {
namespace {

using nlohmann::ordered_json;

std::string two_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

double number_at(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw FormatError(std::string("report field '") + key + "' missing or not a number");
  }
  return j.at(key).get<double>();
}

std::size_t count_at(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw FormatError(std::string("report field '") + key +
                      "' missing or not a count");
  }
  return j.at(key).get<std::size_t>();
}

std::string string_at(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw FormatError(std::string("report field '") + key +
                      "' missing or not a string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

void validate_split_tag(std::string_view split) {
  if (split != "dev" && split != "test" && split != "synthetic") {
    throw ValidationError("split must be dev, test or synthetic, got '" +
                          std::string(split) + "'");
  }
}

double round_percent(double value) { return std::round(value * 100.0) / 100.0; }

EvalReport make_report(std::span<const EntityPrediction> predictions,
                       std::string split, std::string model_label,
                       double threshold) {
  validate_split_tag(split);
  EvalReport r;
  r.split = std::move(split);
  r.model_label = std::move(model_label);
  r.recall_at_1 = round_percent(recall_at_k(predictions, 1, threshold));
  r.recall_at_5 = round_percent(recall_at_k(predictions, 5, threshold));
  r.recall_at_10 = round_percent(recall_at_k(predictions, 10, threshold));
  r.upper_bound = round_percent(upper_bound(predictions, threshold));
  r.per_type = per_type_breakdown(predictions, threshold);
  for (auto& t : r.per_type) t.recall_at_1 = round_percent(t.recall_at_1);
  r.total_entities = predictions.size();
  return r;
}

template <Real T>
std::vector<EntityPrediction> predict(const GroundingModel<T>& model,
                                      std::span<const SampleRecord> records,
                                      std::size_t batch_size) {
  if (batch_size == 0) throw ValidationError("evaluation batch size must be positive");
  NoGradGuard no_grad;
  ForwardContext ctx{.training = false, .rng = nullptr};
  std::vector<EntityPrediction> out;
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const auto chunk =
        records.subspan(start, std::min(batch_size, records.size() - start));
    const Batch batch = collate_batch(chunk);
    const auto logits = model.forward(batch, ctx);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const auto& record = chunk[b];
      for (std::size_t e = 0; e < record.phrases.size(); ++e) {
        EntityPrediction p;
        p.ranking = rank_objects(logits, b, e);
        p.proposals = record.proposals;
        p.gt_boxes = record.phrases[e].gt_boxes;
        p.type = record.phrases[e].type;
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

template <Real T>
EvalReport evaluate(const GroundingModel<T>& model,
                    std::span<const SampleRecord> records,
                    const EvalOptions& options) {
  validate_split_tag(options.split);
  const auto predictions = predict(model, records, options.batch_size);
  const std::string label = options.model_label.empty()
                                ? run_label(model.config().image)
                                : options.model_label;
  return make_report(predictions, options.split, label, options.iou_threshold);
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw UsageError("unknown report format '" + std::string(name) +
                   "' (expected json or csv)");
}

ordered_json report_to_json(const EvalReport& r) {
  ordered_json j;
  j["split"] = r.split;
  j["recall_at_1"] = r.recall_at_1;
  j["recall_at_5"] = r.recall_at_5;
  j["recall_at_10"] = r.recall_at_10;
  j["upper_bound"] = r.upper_bound;
  j["per_type"] = ordered_json::object();
  for (std::size_t t = 0; t < kAllEntityTypes.size(); ++t) {
    j["per_type"][std::string(to_string(kAllEntityTypes[t]))] = {
        {"recall_at_1", r.per_type[t].recall_at_1},
        {"count", r.per_type[t].count}};
  }
  j["total_entities"] = r.total_entities;
  j["model_label"] = r.model_label;
  return j;
}

EvalReport report_from_json(const ordered_json& j) {
  if (!j.is_object()) throw FormatError("report must be a JSON object");
  EvalReport r;
  r.split = string_at(j, "split");
  validate_split_tag(r.split);
  r.recall_at_1 = number_at(j, "recall_at_1");
  r.recall_at_5 = number_at(j, "recall_at_5");
  r.recall_at_10 = number_at(j, "recall_at_10");
  r.upper_bound = number_at(j, "upper_bound");
  if (!j.contains("per_type") || !j.at("per_type").is_object()) {
    throw FormatError("report field 'per_type' missing or not an object");
  }
  for (const auto& [name, entry] : j.at("per_type").items()) {
    const auto t = static_cast<std::size_t>(parse_entity_type(name));
    r.per_type[t].recall_at_1 = number_at(entry, "recall_at_1");
    r.per_type[t].count = count_at(entry, "count");
  }
  r.total_entities = count_at(j, "total_entities");
  r.model_label = string_at(j, "model_label");
  return r;
}

std::string render_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "model,split,R@1,R@5,R@10,Upper Bound,total_entities\n";
  out << r.model_label << ',' << r.split << ',' << two_decimals(r.recall_at_1)
      << ',' << two_decimals(r.recall_at_5) << ',' << two_decimals(r.recall_at_10)
      << ',' << two_decimals(r.upper_bound) << ',' << r.total_entities << "\n\n";
  out << "metric";
  for (auto type : kAllEntityTypes) out << ',' << to_string(type);
  out << "\nR@1";
  for (const auto& t : r.per_type) out << ',' << two_decimals(t.recall_at_1);
  out << "\n# of instances";
  for (const auto& t : r.per_type) out << ',' << t.count;
  out << '\n';
  return out.str();
}

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  if (format == ReportFormat::kJson) {
    out << report_to_json(report).dump(2) << '\n';
  } else {
    out << render_csv(report);
  }
  if (!out) throw std::runtime_error("failed writing report " + path.string());
}

template std::vector<EntityPrediction> predict(const GroundingModel<float>&,
                                               std::span<const SampleRecord>,
                                               std::size_t);
template std::vector<EntityPrediction> predict(const GroundingModel<double>&,
                                               std::span<const SampleRecord>,
                                               std::size_t);
template EvalReport evaluate(const GroundingModel<float>&,
                             std::span<const SampleRecord>, const EvalOptions&);
template EvalReport evaluate(const GroundingModel<double>&,
                             std::span<const SampleRecord>, const EvalOptions&);

}  // namespace grounding
