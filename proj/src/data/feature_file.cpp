#include "grounding/data/feature_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "grounding/core/errors.hpp"
#include "grounding/data/little_endian.hpp"

namespace grounding {

void save_feature_file(const FeatureMatrix& matrix,
                       const std::filesystem::path& path) {
  if (matrix.values.size() != matrix.rows * matrix.cols) {
    throw ValidationError("feature matrix payload does not match its shape");
  }
  std::string bytes = "GRND";
  bytes.push_back(static_cast<char>(kFeatureFileVersion));
  le::put_u32(bytes, static_cast<std::uint32_t>(matrix.rows));
  le::put_u32(bytes, static_cast<std::uint32_t>(matrix.cols));
  for (float v : matrix.values) le::put_f32(bytes, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FeatureMatrix load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& what) {
    return FormatError(path.string() + ": " + what);
  };
  if (bytes.size() < 13 || bytes.compare(0, 4, "GRND") != 0) {
    throw fail("bad magic, expected GRND");
  }
  if (static_cast<unsigned char>(bytes[4]) != kFeatureFileVersion) {
    throw fail("unsupported version " +
               std::to_string(static_cast<unsigned char>(bytes[4])));
  }
  le::Reader reader(std::string_view(bytes).substr(5));
  FeatureMatrix m;
  m.rows = reader.u32();
  m.cols = reader.u32();
  const std::size_t count = m.rows * m.cols;
  if (reader.remaining() != count * 4) {
    throw fail("payload has " + std::to_string(reader.remaining()) +
               " bytes, expected " + std::to_string(count * 4));
  }
  m.values.resize(count);
  for (float& v : m.values) v = reader.f32();
  return m;
}

}  // namespace grounding
