#pragma once

#include <cstdint>

namespace dpf {

// Classic marching cubes lookup tables.
// Corners: 0:(0,0,0) 1:(1,0,0) 2:(1,1,0) 3:(0,1,0) 4:(0,0,1) 5:(1,0,1) 6:(1,1,1) 7:(0,1,1).
// Edges: 0:01 1:12 2:23 3:30 4:45 5:56 6:67 7:74 8:04 9:15 10:26 11:37.
// Case bit c is set when corner c is above the iso level. Ambiguous faces cut
// off the above-level corners, so adjacent cells always agree on shared faces.
extern const uint16_t kEdgeTable[256];
extern const int8_t kTriTable[256][16];

}  // namespace dpf
