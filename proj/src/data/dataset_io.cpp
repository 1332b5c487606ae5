#include "grounding/data/dataset_io.hpp"

#include <fstream>
#include "json.hpp"

#include "grounding/core/errors.hpp"
#include "grounding/data/feature_file.hpp"

namespace grounding {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Box parse_box(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("box must be [x1, y1, x2, y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

ordered_json box_json(const Box& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

SampleRecord parse_record(const json& j, const std::filesystem::path& base_dir) {
  SampleRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  for (const auto& t : j.at("tokens")) {
    const auto id = t.get<long long>();
    if (id < 0) throw ValidationError("record '" + r.image_id + "': negative token id");
    r.token_ids.push_back(static_cast<std::size_t>(id));
  }
  for (const auto& p : j.at("phrases")) {
    PhraseSpan span;
    const auto first = p.at("first").get<long long>();
    const auto last = p.at("last").get<long long>();
    if (first < 0 || last < 0) {
      throw ValidationError("record '" + r.image_id + "': negative phrase index");
    }
    span.first_token = static_cast<std::size_t>(first);
    span.last_token = static_cast<std::size_t>(last);
    span.type = parse_entity_type(p.at("type").get<std::string>());
    for (const auto& b : p.at("gt_boxes")) span.gt_boxes.push_back(parse_box(b));
    r.phrases.push_back(std::move(span));
  }
  for (const auto& b : j.at("boxes")) r.proposals.push_back(parse_box(b));

  const auto& features = j.at("features");
  if (features.is_string()) {
    std::filesystem::path path = features.get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    r.features = load_feature_file(path);
    r.feature_path = features.get<std::string>();
  } else {
    r.features.rows = features.size();
    for (const auto& row : features) {
      if (r.features.cols == 0) r.features.cols = row.size();
      if (row.size() != r.features.cols) {
        throw ValidationError("record '" + r.image_id + "': ragged feature rows");
      }
      for (const auto& v : row) r.features.values.push_back(v.get<float>());
    }
  }
  validate_record(r);
  return r;
}

}  // namespace

std::vector<SampleRecord> parse_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  const auto base_dir = path.parent_path();
  std::vector<SampleRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      records.push_back(parse_record(json::parse(line), base_dir));
    } catch (const json::exception& e) {
      throw FormatError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
  return records;
}

void write_dataset(const std::vector<SampleRecord>& records,
                   const std::filesystem::path& path, FeatureStorage storage) {
  const auto base_dir = path.parent_path();
  if (storage == FeatureStorage::kFiles) {
    std::filesystem::create_directories(base_dir / "features");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  for (const auto& r : records) {
    validate_record(r);
    ordered_json j;
    j["image_id"] = r.image_id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["tokens"] = r.token_ids;
    j["phrases"] = ordered_json::array();
    for (const auto& p : r.phrases) {
      ordered_json pj;
      pj["first"] = p.first_token;
      pj["last"] = p.last_token;
      pj["type"] = std::string(to_string(p.type));
      pj["gt_boxes"] = ordered_json::array();
      for (const auto& b : p.gt_boxes) pj["gt_boxes"].push_back(box_json(b));
      j["phrases"].push_back(std::move(pj));
    }
    j["boxes"] = ordered_json::array();
    for (const auto& b : r.proposals) j["boxes"].push_back(box_json(b));
    if (storage == FeatureStorage::kFiles) {
      const std::filesystem::path rel = std::filesystem::path("features") / (r.image_id + ".grnd");
      save_feature_file(r.features, base_dir / rel);
      j["features"] = rel.generic_string();
    } else {
      auto rows = ordered_json::array();
      for (std::size_t i = 0; i < r.features.rows; ++i) {
        auto row = ordered_json::array();
        for (std::size_t c = 0; c < r.features.cols; ++c) {
          row.push_back(r.features.values[i * r.features.cols + c]);
        }
        rows.push_back(std::move(row));
      }
      j["features"] = std::move(rows);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace grounding
