#pragma once

#include <cstdint>

namespace psplat {

extern const std::int8_t kMcCornerOffset[8][3];
extern const std::int8_t kMcEdgeCorner[12][2];
extern const std::int8_t kMcTriTable[256][16];

}  // namespace psplat
