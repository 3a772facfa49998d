#pragma once

#include <vector>

#include "mrc/image.hpp"

namespace mrc {

struct SparseField {
    std::vector<Vec2> anchors;
    std::vector<Vec2> vectors;
    std::vector<uint8_t> valid;
};

struct WarpParams {
    int k = 4;          // nearest anchors
    double power = 2.0; // inverse-distance exponent
};

// Inverse-distance-weighted mean of the k nearest valid anchors; a point
// coinciding with an anchor gets that anchor's vector exactly. OpenMP across
// points. Throws DataError when no anchor is valid.
std::vector<Vec2> interpolate_at(const SparseField& field, const std::vector<Vec2>& points,
                                 int k, double power);
std::vector<Vec2> interpolate_at_serial(const SparseField& field, const std::vector<Vec2>& points,
                                        int k, double power);

// Forward-maps every set pixel through the interpolated field, rounds to the
// nearest pixel, drops out-of-bounds targets, then applies one 3x3 closing.
VesselMask warp_mask(const VesselMask& mask, const SparseField& field, const WarpParams& params);

} // namespace mrc
