#include "grounding/core/shape.hpp"

#include <functional>
#include <numeric>
#include <sstream>

#include "grounding/core/errors.hpp"

namespace grounding {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast shapes " + to_string(a) + " and " +
                       to_string(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

std::vector<std::size_t> broadcast_index_map(const Shape& out,
                                             const Shape& in) {
  if (in.size() > out.size()) {
    throw ShapeError("cannot broadcast " + to_string(in) + " to " +
                     to_string(out));
  }
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  // Strides of `in` laid over the axes of `out`; zero on broadcast axes.
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t axis = i + offset;
    if (in[i] != out[axis] && in[i] != 1) {
      throw ShapeError("cannot broadcast " + to_string(in) + " to " +
                       to_string(out));
    }
    strides[axis] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }

  const std::size_t total = numel(out);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> index(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    map[flat] = src;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++index[axis];
      src += strides[axis];
      if (index[axis] < out[axis]) break;
      src -= strides[axis] * index[axis];
      index[axis] = 0;
    }
  }
  return map;
}

}  // namespace grounding
