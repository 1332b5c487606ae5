#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "grounding/core/errors.hpp"
#include "grounding/data/synthetic.hpp"
#include "grounding/eval/evaluate.hpp"
#include "grounding/eval/metrics.hpp"
#include "grounding/eval/reference.hpp"
#include "grounding/model.hpp"
#include "grounding/toy.hpp"
#include "oracles.hpp"

using namespace grounding;
namespace fs = std::filesystem;

namespace {

EntityPrediction prediction(std::vector<std::size_t> ranking, std::vector<Box> proposals,
                            std::vector<Box> gt, EntityType type = EntityType::kPeople) {
  return {std::move(ranking), std::move(proposals), std::move(gt), type};
}

EvalReport sample_report() {
  EvalReport r;
  r.split = "test";
  r.recall_at_1 = 71.36;
  r.recall_at_5 = 84.76;
  r.recall_at_10 = 86.49;
  r.upper_bound = 87.45;
  for (std::size_t i = 0; i < 8; ++i)
    r.per_type[i] = {reference::kTestTypeRecallAt1[i], reference::kTestTypeCounts[i]};
  r.total_entities = std::accumulate(reference::kTestTypeCounts.begin(),
                                     reference::kTestTypeCounts.end(), std::size_t{0});
  r.model_label = "L1-H2-abs";
  return r;
}

SampleRecord permute_proposals(SampleRecord r, const std::vector<std::size_t>& perm) {
  const auto boxes = r.proposals;
  const auto features = r.features.values;
  const std::size_t d = r.features.cols;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    r.proposals[i] = boxes[perm[i]];
    std::copy_n(features.begin() + static_cast<long>(perm[i] * d), d,
                r.features.values.begin() + static_cast<long>(i * d));
  }
  return r;
}

}  // namespace

TEST_CASE("entity_hit examples") {
  const std::vector<Box> proposals{{50, 50, 60, 60}, {0, 0, 10, 10}, {20, 20, 30, 30}};
  const std::vector<Box> gt{{0, 0, 10, 10}};
  const std::vector<std::size_t> top_first{1, 0, 2}, top_last{0, 2, 1};
  CHECK(entity_hit(top_first, proposals, gt, 1));
  CHECK_FALSE(entity_hit(top_last, proposals, gt, 1));
  CHECK_FALSE(entity_hit(top_last, proposals, gt, 2));
  CHECK(entity_hit(top_last, proposals, gt, 3));
  CHECK(entity_hit(top_last, proposals, gt, 10));
  const std::vector<Box> far{{200, 200, 210, 210}};
  for (std::size_t k : {1, 5, 10}) CHECK_FALSE(entity_hit(top_first, proposals, far, k));
  // Multiple gt boxes: any one suffices.
  const std::vector<Box> two{{200, 200, 210, 210}, {21, 20, 30, 30}};
  CHECK(entity_hit(std::vector<std::size_t>{2, 0, 1}, proposals, two, 1));
}

TEST_CASE("recall and upper bound examples") {
  const std::vector<Box> boxes{{0, 0, 10, 10}, {20, 20, 30, 30}};
  std::vector<EntityPrediction> preds{
      prediction({0, 1}, boxes, {{0, 0, 10, 10}}),
      prediction({0, 1}, boxes, {{20, 20, 30, 30}}),
  };
  CHECK(recall_at_k(preds, 1) == 50.0);
  CHECK(oracle::recall_at_k(preds, 1) == 50.0);
  CHECK(recall_at_k(preds, 5) == 100.0);
  CHECK(upper_bound(preds) == 100.0);

  preds.push_back(prediction({0, 1}, boxes, {{100, 100, 110, 110}}));
  CHECK(upper_bound(preds) == doctest::Approx(200.0 / 3));
  CHECK(recall_at_k(preds, 10) == doctest::Approx(200.0 / 3));

  const std::vector<EntityPrediction> none{prediction({0}, {{0, 0, 1, 1}}, {{5, 5, 6, 6}})};
  CHECK(upper_bound(none) == 0.0);
  CHECK_THROWS_AS(recall_at_k({}, 1), ValidationError);
  CHECK_THROWS_AS(upper_bound({}), ValidationError);
  CHECK_THROWS_AS(recall_at_k(preds, 0), ValidationError);
}

TEST_CASE("metrics match the brute-force oracle and stay ordered") {
  Rng rng(1);
  for (int split = 0; split < 300; ++split) {
    std::vector<EntityPrediction> preds;
    const std::size_t samples = 1 + rng.below(10);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t objects = 1 + rng.below(8);
      std::vector<Box> proposals;
      for (std::size_t o = 0; o < objects; ++o) {
        const double x = static_cast<double>(rng.below(30)), y = static_cast<double>(rng.below(30));
        proposals.push_back({x, y, x + 1 + static_cast<double>(rng.below(15)),
                             y + 1 + static_cast<double>(rng.below(15))});
      }
      const std::size_t entities = 1 + rng.below(4);
      for (std::size_t e = 0; e < entities; ++e) {
        std::vector<std::size_t> ranking(objects);
        std::iota(ranking.begin(), ranking.end(), 0);
        for (std::size_t i = objects; i > 1; --i) std::swap(ranking[i - 1], ranking[rng.below(i)]);
        std::vector<Box> gt;
        for (std::size_t g = 0, n = 1 + rng.below(2); g < n; ++g) {
          const auto& base = proposals[rng.below(objects)];
          const double dx = static_cast<double>(rng.below(5)) - 2;
          const double x1 = std::max(0.0, base.x1 + dx);
          gt.push_back({x1, base.y1, std::max(x1 + 1, base.x2 + dx + 1), base.y2});
        }
        preds.push_back(prediction(ranking, proposals, gt, kAllEntityTypes[rng.below(8)]));
      }
    }
    double previous = 0.0;
    for (std::size_t k : {1, 5, 10}) {
      const double r = recall_at_k(preds, k);
      CHECK(r == oracle::recall_at_k(preds, k));
      CHECK(r >= previous);
      previous = r;
    }
    const double ub = upper_bound(preds);
    CHECK(ub == oracle::upper_bound(preds));
    CHECK(previous <= ub);
    CHECK(ub <= 100.0);

    const auto breakdown = per_type_breakdown(preds);
    std::size_t total = 0;
    for (std::size_t t = 0; t < 8; ++t) {
      total += breakdown[t].count;
      std::vector<EntityPrediction> only;
      for (const auto& p : preds)
        if (p.type == kAllEntityTypes[t]) only.push_back(p);
      CHECK(breakdown[t].count == only.size());
      CHECK(breakdown[t].recall_at_1 == (only.empty() ? 0.0 : oracle::recall_at_k(only, 1)));
    }
    CHECK(total == preds.size());
  }
}

TEST_CASE("single-type breakdown equals overall recall") {
  const std::vector<Box> boxes{{0, 0, 10, 10}, {20, 20, 30, 30}};
  const std::vector<EntityPrediction> preds{
      prediction({0, 1}, boxes, {{0, 0, 10, 10}}, EntityType::kScene),
      prediction({0, 1}, boxes, {{20, 20, 30, 30}}, EntityType::kScene),
      prediction({1, 0}, boxes, {{20, 20, 30, 30}}, EntityType::kScene),
  };
  const auto b = per_type_breakdown(preds);
  CHECK(b[6].recall_at_1 == recall_at_k(preds, 1));
  CHECK(b[6].count == 3);
  CHECK(b[0] == TypeRecall{});
}

TEST_CASE("report rounding, JSON and CSV") {
  CHECK(round_percent(71.355) == doctest::Approx(71.36));
  CHECK(round_percent(200.0 / 3) == 66.67);
  CHECK(round_percent(100.0) == 100.0);

  const auto r = sample_report();
  const auto j = report_to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"split", "recall_at_1", "recall_at_5", "recall_at_10",
                                         "upper_bound", "per_type", "total_entities",
                                         "model_label"});
  CHECK(j["per_type"]["people"]["count"] == 5656);
  CHECK(j["per_type"].size() == 8);
  CHECK(report_from_json(j) == r);
  CHECK(report_from_json(nlohmann::ordered_json::parse(j.dump())) == r);

  auto bad = j;
  bad["split"] = "train";
  CHECK_THROWS_AS(report_from_json(bad), ValidationError);

  const auto csv = render_csv(r);
  CHECK(csv.rfind("model,split,R@1,R@5,R@10,Upper Bound,total_entities\n"
                  "L1-H2-abs,test,71.36,84.76,86.49,87.45,14558\n\n"
                  "metric,people,clothing,bodyparts,animals,vehicles,instruments,scene,other\n"
                  "R@1,81.95,76.50,46.27,82.05,79.00,35.80,70.23,53.53\n"
                  "# of instances,5656,2306,523,518,400,162,1619,3374\n",
                  0) == 0);

  CHECK(parse_report_format("json") == ReportFormat::kJson);
  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK_THROWS_AS(parse_report_format("xml"), UsageError);
  CHECK_THROWS_AS(parse_report_format("JSON"), UsageError);

  const auto dir = fs::temp_directory_path() / ("grounding_eval_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  emit_report(r, ReportFormat::kJson, dir / "r.json");
  std::ifstream in(dir / "r.json");
  CHECK(report_from_json(nlohmann::ordered_json::parse(in)) == r);
  emit_report(r, ReportFormat::kCsv, dir / "r.csv");
  std::ifstream csv_in(dir / "r.csv");
  CHECK(std::string(std::istreambuf_iterator<char>(csv_in), {}) == csv);
  fs::remove_all(dir);
}

TEST_CASE("split tags") {
  for (const char* s : {"dev", "test", "synthetic"}) CHECK_NOTHROW(validate_split_tag(s));
  CHECK_THROWS_AS(validate_split_tag("val"), ValidationError);
}

TEST_CASE("reference constants are consistent") {
  std::size_t total = 0;
  for (auto c : reference::kTestTypeCounts) total += c;
  CHECK(total == 14558);
  for (const auto& s : {reference::kTest, reference::kDev}) {
    CHECK(s.recall_at_1 <= s.recall_at_5);
    CHECK(s.recall_at_5 <= s.recall_at_10);
    CHECK(s.recall_at_10 <= s.upper_bound);
  }
  CHECK(reference::kTest.recall_at_1 == 71.36);
  CHECK(reference::kTest.upper_bound == 87.45);
  CHECK(reference::kTestTypeRecallAt1[0] == 81.95);
  CHECK(reference::kTestTypeCounts[0] == 5656);
}

TEST_CASE("evaluate is deterministic, ordered and labelled") {
  SyntheticSpec spec;
  spec.num_samples = 24;
  const auto records = generate_synthetic(spec);
  Rng init(2);
  const GroundingModel<float> model(toy_model_config(), init);
  EvalOptions options;
  options.split = "synthetic";
  const auto a = evaluate(model, records, options);
  const auto b = evaluate(model, records, options);
  CHECK(a == b);
  CHECK(a.model_label == "L1-H2-abs");
  CHECK(parse_run_label(a.model_label) == RunLabel{1, 2, true});
  CHECK(a.total_entities == 48);
  CHECK(a.upper_bound == 100.0);
  CHECK(a.recall_at_1 <= a.recall_at_5);
  CHECK(a.recall_at_5 <= a.recall_at_10);
  CHECK(a.recall_at_10 <= a.upper_bound);

  options.batch_size = 5;
  CHECK(evaluate(model, records, options) == a);
  options.split = "bogus";
  CHECK_THROWS_AS(evaluate(model, records, options), ValidationError);
}

TEST_CASE("metrics are invariant to proposal order") {
  SyntheticSpec spec;
  spec.num_samples = 16;
  const auto records = generate_synthetic(spec);
  Rng init(3);
  const GroundingModel<double> model(toy_model_config(), init);
  Rng rng(4);
  std::vector<SampleRecord> permuted;
  for (const auto& r : records) {
    std::vector<std::size_t> perm(r.proposals.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    permuted.push_back(permute_proposals(r, perm));
  }
  EvalOptions options;
  options.split = "synthetic";
  CHECK(evaluate(model, permuted, options) == evaluate(model, records, options));
}

TEST_CASE("random-init recall@1 matches the chance rate") {
  // Over independent data and init seeds a random model ranks a uniformly
  // random object first, so E[R@1] = 100 * mean(positives / objects).
  std::vector<double> observed;
  double expected = 0.0;
  std::size_t entities = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SyntheticSpec spec;
    spec.seed = 100 + seed;
    spec.num_samples = 32;
    const auto records = generate_synthetic(spec);
    Rng init(seed);
    const GroundingModel<float> model(toy_model_config(), init);
    observed.push_back(recall_at_k(predict(model, records), 1));
    for (const auto& r : records) {
      for (const auto& p : r.phrases) {
        const auto pos = label_positives(r.proposals, p.gt_boxes);
        expected += 100.0 * static_cast<double>(std::count(pos.begin(), pos.end(), 1)) /
                    static_cast<double>(pos.size());
        ++entities;
      }
    }
  }
  expected /= static_cast<double>(entities);
  const double n = static_cast<double>(observed.size());
  const double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / n;
  double var = 0.0;
  for (double v : observed) var += (v - mean) * (v - mean);
  const double stderr_mean = std::sqrt(var / (n - 1) / n);
  CAPTURE(mean);
  CAPTURE(expected);
  CAPTURE(stderr_mean);
  CHECK(std::abs(mean - expected) < 4.0 * stderr_mean);
}
