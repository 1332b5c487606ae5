#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "grounding/data/record.hpp"
#include "grounding/eval/metrics.hpp"
#include "grounding/model.hpp"

namespace grounding {

// Percentages rounded to two decimals.
struct EvalReport {
  std::string split;  // dev | test | synthetic
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  double upper_bound = 0.0;
  TypeBreakdown per_type{};
  std::size_t total_entities = 0;
  std::string model_label;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

void validate_split_tag(std::string_view split);

double round_percent(double value);

EvalReport make_report(std::span<const EntityPrediction> predictions,
                       std::string split, std::string model_label,
                       double threshold = kDefaultIouThreshold);

struct EvalOptions {
  std::string split = "dev";
  std::size_t batch_size = 32;
  double iou_threshold = kDefaultIouThreshold;
  std::string model_label;  // empty: derived from the image branch config
};

// Inference with dropout off and no graph recording; one prediction per
// phrase occurrence, in record order.
template <Real T>
std::vector<EntityPrediction> predict(const GroundingModel<T>& model,
                                      std::span<const SampleRecord> records,
                                      std::size_t batch_size = 32);

template <Real T>
EvalReport evaluate(const GroundingModel<T>& model,
                    std::span<const SampleRecord> records,
                    const EvalOptions& options = {});

enum class ReportFormat { kJson, kCsv };

// "json" or "csv"; anything else is a UsageError.
ReportFormat parse_report_format(std::string_view name);

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::ordered_json& j);

// Two blocks separated by a blank line:
//   model,split,R@1,R@5,R@10,Upper Bound,total_entities
//   <one row>
//
//   metric,people,clothing,bodyparts,animals,vehicles,instruments,scene,other
//   R@1,...
//   # of instances,...
std::string render_csv(const EvalReport& report);

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace grounding
