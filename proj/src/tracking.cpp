#include "mrc/tracking.hpp"

#include <algorithm>
#include <cmath>

namespace mrc {

Pyramid build_pyramid(const Frame& f, int levels) {
    Pyramid p;
    p.levels.push_back(f);
    for (int l = 1; l < levels; ++l) {
        const Frame& prev = p.levels.back();
        int w = prev.width / 2, h = prev.height / 2;
        if (w < 16 || h < 16) break;
        Frame next = make_frame(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                next.at(x, y) = 0.25f * (prev.at(2 * x, 2 * y) + prev.at(2 * x + 1, 2 * y) +
                                         prev.at(2 * x, 2 * y + 1) + prev.at(2 * x + 1, 2 * y + 1));
        p.levels.push_back(std::move(next));
    }
    return p;
}

namespace {

struct TrackResult {
    Vec2 flow{0, 0};
    bool valid = false;
};

bool window_inside(const Frame& f, const Vec2& c, int hw) {
    // +1 margin for central-difference gradients under bilinear sampling
    return c.x - hw - 1 >= 0.0 && c.y - hw - 1 >= 0.0 &&
           c.x + hw + 1 <= f.width - 1.0 && c.y + hw + 1 <= f.height - 1.0;
}

TrackResult track_one(const Pyramid& ref, const Pyramid& cur, const Vec2& corner,
                      const LkParams& params) {
    int hw = params.window / 2;
    int top = static_cast<int>(ref.levels.size()) - 1;
    Vec2 g{0, 0};

    for (int level = top; level >= 0; --level) {
        const Frame& rf = ref.levels[level];
        const Frame& cf = cur.levels[level];
        // level too small for the window: skip it, refine at finer levels
        if (level > 0 && std::min(rf.width, rf.height) < params.window + 3) {
            g.x *= 2.0;
            g.y *= 2.0;
            continue;
        }
        double scale = std::pow(2.0, level);
        Vec2 p{corner.x / scale, corner.y / scale};
        if (!window_inside(rf, p, hw)) {
            if (level == 0) return {};
            // too close to the border at this resolution: refine at finer levels
            g.x *= 2.0;
            g.y *= 2.0;
            continue;
        }

        // gradients and structure tensor on the reference window
        int n = params.window * params.window;
        std::vector<double> ix(n), iy(n), rv(n);
        double gxx = 0, gxy = 0, gyy = 0;
        int idx = 0;
        for (int wy = -hw; wy <= hw; ++wy) {
            for (int wx = -hw; wx <= hw; ++wx, ++idx) {
                double x = p.x + wx, y = p.y + wy;
                rv[idx] = rf.sample(x, y);
                ix[idx] = 0.5 * (rf.sample(x + 1, y) - rf.sample(x - 1, y));
                iy[idx] = 0.5 * (rf.sample(x, y + 1) - rf.sample(x, y - 1));
                gxx += ix[idx] * ix[idx];
                gxy += ix[idx] * iy[idx];
                gyy += iy[idx] * iy[idx];
            }
        }
        double tr = gxx + gyy;
        double disc = std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy);
        double min_eig = 0.5 * (tr - disc) / n;
        if (level == 0 && min_eig < params.min_eig_threshold) return {};
        double det = gxx * gyy - gxy * gxy;
        if (det <= 0.0) {
            if (level == 0) return {};
            g.x *= 2.0;
            g.y *= 2.0;
            continue;
        }

        Vec2 nu{0, 0};
        for (int it = 0; it < params.max_iterations; ++it) {
            Vec2 q{p.x + g.x + nu.x, p.y + g.y + nu.y};
            if (!window_inside(cf, q, hw)) {
                if (level == 0) return {};
                break; // stop refining at this resolution, finer levels continue
            }
            double bx = 0, by = 0;
            idx = 0;
            for (int wy = -hw; wy <= hw; ++wy) {
                for (int wx = -hw; wx <= hw; ++wx, ++idx) {
                    double di = rv[idx] - cf.sample(q.x + wx, q.y + wy);
                    bx += di * ix[idx];
                    by += di * iy[idx];
                }
            }
            Vec2 step{(gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det};
            nu.x += step.x;
            nu.y += step.y;
            if (std::hypot(step.x, step.y) < params.epsilon) break;
        }
        g.x += nu.x;
        g.y += nu.y;
        if (level > 0) {
            g.x *= 2.0;
            g.y *= 2.0;
        }
    }
    if (!window_inside(cur.levels[0], {corner.x + g.x, corner.y + g.y}, hw)) return {};
    return {g, true};
}

template <bool Parallel>
FlowSet track_impl(const Pyramid& ref, const Pyramid& cur, const std::vector<Vec2>& corners,
                   const LkParams& params) {
    FlowSet out;
    out.displacements.assign(corners.size(), {0, 0});
    out.valid.assign(corners.size(), 0);
    int n = static_cast<int>(corners.size());
#pragma omp parallel for schedule(dynamic, 8) if (Parallel)
    for (int i = 0; i < n; ++i) {
        TrackResult r = track_one(ref, cur, corners[i], params);
        if (r.valid) {
            out.displacements[i] = r.flow;
            out.valid[i] = 1;
        }
    }
    return out;
}

void check_dims(const Frame& ref, const Frame& cur) {
    if (ref.width != cur.width || ref.height != cur.height)
        throw DataError("track: frame dimension mismatch");
}

} // namespace

FlowSet track_sparse(const Pyramid& ref_pyr, const Pyramid& cur_pyr,
                     const std::vector<Vec2>& corners, const LkParams& params) {
    FlowSet f = track_impl<true>(ref_pyr, cur_pyr, corners, params);
    f.target_index = cur_pyr.levels[0].index;
    return f;
}

FlowSet track_sparse(const Frame& ref, const Frame& cur, const std::vector<Vec2>& corners,
                     const LkParams& params) {
    check_dims(ref, cur);
    return track_sparse(build_pyramid(ref, params.pyramid_levels),
                        build_pyramid(cur, params.pyramid_levels), corners, params);
}

FlowSet track_sparse_serial(const Frame& ref, const Frame& cur, const std::vector<Vec2>& corners,
                            const LkParams& params) {
    check_dims(ref, cur);
    FlowSet f = track_impl<false>(build_pyramid(ref, params.pyramid_levels),
                                  build_pyramid(cur, params.pyramid_levels), corners, params);
    f.target_index = cur.index;
    return f;
}

std::vector<Vec2> grid_points(const Rect& roi, int stride, int window, int width, int height) {
    if (stride < 1) throw DataError("grid_points: stride must be >= 1");
    int hw = window / 2 + 2;
    std::vector<Vec2> pts;
    for (int y = roi.y; y < roi.y + roi.h; y += stride)
        for (int x = roi.x; x < roi.x + roi.w; x += stride)
            if (x >= hw && y >= hw && x < width - hw && y < height - hw)
                pts.push_back({double(x), double(y)});
    return pts;
}

FlowSet track_dense_grid(const Frame& ref, const Frame& cur, const Rect& roi, int stride,
                         const LkParams& params) {
    check_dims(ref, cur);
    if (roi.x < 0 || roi.y < 0 || roi.x + roi.w > ref.width || roi.y + roi.h > ref.height)
        throw DataError("track_dense_grid: roi outside frame");
    auto pts = grid_points(roi, stride, params.window, ref.width, ref.height);
    return track_sparse(ref, cur, pts, params);
}

} // namespace mrc
