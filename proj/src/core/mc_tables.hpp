#pragma once

#include <array>
#include <cstdint>

namespace lsa::mc {

// Cube corners, bit i of the case index is corner i.
inline constexpr std::array<std::array<int, 3>, 8> kCorners = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

// Each cube edge as (lower corner, axis): the edge runs from that corner
// one step along the axis.
inline constexpr std::array<std::array<int, 2>, 12> kEdges = {{
    {0, 0}, {1, 1}, {3, 0}, {0, 1}, {4, 0}, {5, 1}, {7, 0}, {4, 1}, {0, 2}, {1, 2}, {2, 2}, {3, 2},
}};

extern const std::array<std::array<std::int8_t, 16>, 256> kTriangleTable;

} // namespace lsa::mc
