#include "mrc/features.hpp"

#include <algorithm>
#include <cmath>

namespace mrc {

namespace {

// Min eigenvalue of the structure tensor of the block around (x,y).
// Gradients by central differences; valid for x,y in [hb+1, dim-hb-2].
double response_at(const Frame& f, int x, int y, int hb) {
    double sxx = 0, sxy = 0, syy = 0;
    for (int dy = -hb; dy <= hb; ++dy) {
        for (int dx = -hb; dx <= hb; ++dx) {
            int px = x + dx, py = y + dy;
            double ix = 0.5 * (f.at(px + 1, py) - f.at(px - 1, py));
            double iy = 0.5 * (f.at(px, py + 1) - f.at(px, py - 1));
            sxx += ix * ix;
            sxy += ix * iy;
            syy += iy * iy;
        }
    }
    double tr = sxx + syy;
    double det = std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
    return 0.5 * (tr - det);
}

template <bool Parallel>
ResponseMap response_map(const Frame& frame, int block_size) {
    if (block_size < 3 || block_size % 2 == 0)
        throw DataError("min_eig_response: block_size must be odd and >= 3");
    if (frame.width < block_size + 2 || frame.height < block_size + 2)
        throw DataError("min_eig_response: frame smaller than block");
    int hb = block_size / 2;
    ResponseMap r;
    r.width = frame.width;
    r.height = frame.height;
    r.values.assign(static_cast<size_t>(frame.width) * frame.height, 0.0f);
    int y0 = hb + 1, y1 = frame.height - hb - 1;
    int x0 = hb + 1, x1 = frame.width - hb - 1;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            r.values[static_cast<size_t>(y) * frame.width + x] =
                static_cast<float>(response_at(frame, x, y, hb));
    return r;
}

} // namespace

ResponseMap min_eig_response(const Frame& frame, int block_size) {
    return response_map<true>(frame, block_size);
}

ResponseMap min_eig_response_serial(const Frame& frame, int block_size) {
    return response_map<false>(frame, block_size);
}

CornerSet detect_corners(const Frame& frame, const VesselMask& mask, const CornerParams& params) {
    if (mask.width != frame.width || mask.height != frame.height)
        throw DataError("detect_corners: mask/frame dimension mismatch");

    ResponseMap r = min_eig_response(frame, params.block_size);
    float max_resp = 0.0f;
    for (float v : r.values) max_resp = std::max(max_resp, v);
    double threshold = params.quality_level * max_resp;

    struct Cand {
        float resp;
        int x, y;
    };
    std::vector<Cand> cands;
    int m = params.margin;
    for (int y = m; y < frame.height - m; ++y)
        for (int x = m; x < frame.width - m; ++x) {
            float v = r.at(x, y);
            if (v > threshold && v > 0.0f) cands.push_back({v, x, y});
        }
    // descending response, row-major tie-break for determinism
    std::stable_sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
        if (a.resp != b.resp) return a.resp > b.resp;
        return static_cast<int64_t>(a.y) * frame.width + a.x <
               static_cast<int64_t>(b.y) * frame.width + b.x;
    });

    VesselMask dilated = dilate(mask, params.mask_dilation);
    CornerSet out;
    double min_d2 = params.min_distance * params.min_distance;
    auto far_enough = [&](const std::vector<Vec2>& set, double x, double y) {
        for (const auto& p : set) {
            double dx = p.x - x, dy = p.y - y;
            if (dx * dx + dy * dy < min_d2) return false;
        }
        return true;
    };
    for (const auto& c : cands) {
        bool vascular = dilated.at(c.x, c.y) != 0;
        auto& set = vascular ? out.vascular : out.non_vascular;
        if (static_cast<int>(set.size()) >= params.max_corners) continue;
        if (!far_enough(set, c.x, c.y)) continue;
        set.push_back({double(c.x), double(c.y)});
    }
    if (out.vascular.empty()) throw DataError("detect_corners: no vascular corners found");
    if (out.non_vascular.empty()) throw DataError("detect_corners: no non-vascular corners found");
    return out;
}

} // namespace mrc
