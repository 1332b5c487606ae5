#include "grounding/training/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "grounding/core/errors.hpp"
#include "grounding/data/little_endian.hpp"
#include "grounding/io/config_io.hpp"

namespace grounding {
namespace {

using nlohmann::ordered_json;

constexpr std::string_view kMagic = "GCKP";
constexpr std::string_view kFirstMoment = "adam.m.";
constexpr std::string_view kSecondMoment = "adam.v.";

struct DirectoryEntry {
  const NamedArray* array;
  std::string name;
};

std::vector<DirectoryEntry> payload_order(const Checkpoint& c) {
  std::vector<DirectoryEntry> out;
  for (const auto& a : c.parameters) out.push_back({&a, a.name});
  for (const auto& a : c.optimizer.first_moment) {
    out.push_back({&a, std::string(kFirstMoment) + a.name});
  }
  for (const auto& a : c.optimizer.second_moment) {
    out.push_back({&a, std::string(kSecondMoment) + a.name});
  }
  return out;
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  ordered_json manifest;
  manifest["config"] = to_json(c.model);
  manifest["train"] = to_json(c.train);
  manifest["epoch"] = c.epoch;
  manifest["best_metric"] = c.best_metric;
  manifest["best_epoch"] = c.best_epoch;
  manifest["epochs_without_improvement"] = c.epochs_without_improvement;
  manifest["rng_state"] = c.rng_state;
  manifest["history"] = ordered_json::array();
  for (const auto& h : c.history) {
    manifest["history"].push_back({{"epoch", h.epoch},
                                   {"train_loss", h.train_loss},
                                   {"dev_recall_at_1", h.dev_recall_at_1}});
  }
  manifest["optimizer"] = {{"beta1", c.optimizer.beta1},
                           {"beta2", c.optimizer.beta2},
                           {"eps", c.optimizer.eps},
                           {"step", c.optimizer.step}};

  const auto order = payload_order(c);
  manifest["directory"] = ordered_json::array();
  std::size_t offset = 0;
  for (const auto& entry : order) {
    if (numel(entry.array->shape) != entry.array->values.size()) {
      throw ValidationError("array '" + entry.name + "' does not match its shape");
    }
    manifest["directory"].push_back(
        {{"name", entry.name}, {"shape", entry.array->shape}, {"offset", offset}});
    offset += entry.array->values.size();
  }

  const std::string text = manifest.dump();
  std::string bytes(kMagic);
  bytes.push_back(static_cast<char>(kCheckpointVersion));
  le::put_u32(bytes, static_cast<std::uint32_t>(text.size()));
  bytes += text;
  bytes.reserve(bytes.size() + offset * 4);
  for (const auto& entry : order) {
    for (float v : entry.array->values) le::put_f32(bytes, v);
  }
  return bytes;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagic.size() + 1 || bytes.compare(0, 4, kMagic) != 0) {
    throw FormatError("bad magic, expected GCKP");
  }
  const auto version = static_cast<unsigned char>(bytes[4]);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  le::Reader reader(std::string_view(bytes).substr(5));
  const std::uint32_t manifest_size = reader.u32();
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(reader.bytes(manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt manifest: ") + e.what());
  }

  Checkpoint c;
  try {
    c.model = model_config_from_json(manifest.at("config"));
    c.train = train_config_from_json(manifest.at("train"));
    c.epoch = manifest.at("epoch").get<std::size_t>();
    c.best_metric = manifest.at("best_metric").get<double>();
    c.best_epoch = manifest.at("best_epoch").get<std::size_t>();
    c.epochs_without_improvement =
        manifest.at("epochs_without_improvement").get<std::size_t>();
    c.rng_state = manifest.at("rng_state").get<std::string>();
    for (const auto& h : manifest.at("history")) {
      c.history.push_back({h.at("epoch").get<std::size_t>(),
                           h.at("train_loss").get<double>(),
                           h.at("dev_recall_at_1").get<double>()});
    }
    const auto& opt = manifest.at("optimizer");
    c.optimizer.beta1 = opt.at("beta1").get<double>();
    c.optimizer.beta2 = opt.at("beta2").get<double>();
    c.optimizer.eps = opt.at("eps").get<double>();
    c.optimizer.step = opt.at("step").get<std::uint64_t>();

    std::size_t expected_offset = 0;
    for (const auto& entry : manifest.at("directory")) {
      NamedArray a;
      std::string name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<Shape>();
      if (entry.at("offset").get<std::size_t>() != expected_offset) {
        throw FormatError("directory offset out of sequence at '" + name + "'");
      }
      a.values.resize(numel(a.shape));
      expected_offset += a.values.size();
      for (float& v : a.values) v = reader.f32();

      if (starts_with(name, kFirstMoment)) {
        a.name = name.substr(kFirstMoment.size());
        c.optimizer.first_moment.push_back(std::move(a));
      } else if (starts_with(name, kSecondMoment)) {
        a.name = name.substr(kSecondMoment.size());
        c.optimizer.second_moment.push_back(std::move(a));
      } else {
        a.name = std::move(name);
        c.parameters.push_back(std::move(a));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt manifest: ") + e.what());
  }
  if (reader.remaining() != 0) {
    throw FormatError(std::to_string(reader.remaining()) +
                      " trailing bytes after checkpoint payload");
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace grounding
