#pragma once

#include <vector>

#include "mrc/image.hpp"

namespace mrc {

struct LkParams {
    int window = 21;          // odd, >= 5
    int pyramid_levels = 3;   // >= 1
    int max_iterations = 30;
    double epsilon = 0.01;    // convergence step norm, px
    double min_eig_threshold = 1e-4; // per-pixel normalized min eigenvalue gate
};

struct FlowSet {
    std::vector<Vec2> displacements; // aligned with the corner list
    std::vector<uint8_t> valid;      // invalid entries carry (0,0)
    int target_index = 0;

    size_t size() const { return displacements.size(); }
};

struct Pyramid {
    std::vector<Frame> levels; // levels[0] is full resolution
};

// 2x box-filter downsampling.
Pyramid build_pyramid(const Frame& f, int levels);

// Coarse-to-fine pyramidal Lucas-Kanade from ref to cur for the given
// corners. OpenMP across corners; output order matches input order.
FlowSet track_sparse(const Frame& ref, const Frame& cur,
                     const std::vector<Vec2>& corners, const LkParams& params);
FlowSet track_sparse_serial(const Frame& ref, const Frame& cur,
                            const std::vector<Vec2>& corners, const LkParams& params);

// Prebuilt-pyramid variants for per-frame loops that reuse the reference.
FlowSet track_sparse(const Pyramid& ref_pyr, const Pyramid& cur_pyr,
                     const std::vector<Vec2>& corners, const LkParams& params);

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
};

// Grid points of the roi at the given stride, margin-clipped to trackable
// positions. Used by track_dense_grid and by the dense ablation mode.
std::vector<Vec2> grid_points(const Rect& roi, int stride, int window, int width, int height);

FlowSet track_dense_grid(const Frame& ref, const Frame& cur, const Rect& roi,
                         int stride, const LkParams& params);

} // namespace mrc
