#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace grounding {

// Row-major dimension list. The empty shape is a scalar holding one value.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Numpy-style right-aligned broadcast of two shapes; throws ShapeError.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// For every flat index of `out`, the flat index of `in` it reads when `in`
// is broadcast to `out`. `in` must be broadcastable to `out`.
std::vector<std::size_t> broadcast_index_map(const Shape& out, const Shape& in);

}  // namespace grounding
