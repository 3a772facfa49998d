#pragma once

#include <vector>

#include "mrc/image.hpp"

namespace mrc {

struct CornerParams {
    int max_corners = 200;      // per set
    double quality_level = 0.05; // fraction of the global max response
    double min_distance = 8.0;   // px, within each set
    int block_size = 5;          // odd
    int mask_dilation = 3;       // px, before vascular/non-vascular split
    int margin = 12;             // px kept clear of the frame border (tracker window half-size)
};

struct CornerSet {
    std::vector<Vec2> vascular;     // inside the dilated vessel mask
    std::vector<Vec2> non_vascular; // outside it
};

struct ResponseMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    float at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Min-eigenvalue of the gradient structure tensor summed over block_size,
// central-difference gradients, half-block border zeroed. OpenMP over rows.
ResponseMap min_eig_response(const Frame& frame, int block_size);
// Serial reference, bit-identical to the parallel kernel.
ResponseMap min_eig_response_serial(const Frame& frame, int block_size);

// Shi-Tomasi selection: threshold at quality_level * max response, greedy
// min-distance suppression in descending response order (row-major
// tie-break), split by the dilated mask. Throws DataError if either set
// comes out empty.
CornerSet detect_corners(const Frame& frame, const VesselMask& mask, const CornerParams& params);

} // namespace mrc
