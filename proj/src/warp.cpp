#include "mrc/warp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mrc {

namespace {

Vec2 idw_at(const std::vector<Vec2>& anchors, const std::vector<Vec2>& vectors,
            const std::vector<size_t>& order, const Vec2& p, int k, double power) {
    // order holds indices of valid anchors; pick the k nearest
    struct Near {
        double d2;
        size_t idx;
    };
    std::vector<Near> near;
    near.reserve(order.size());
    for (size_t idx : order) {
        double dx = anchors[idx].x - p.x, dy = anchors[idx].y - p.y;
        near.push_back({dx * dx + dy * dy, idx});
    }
    size_t kk = std::min(static_cast<size_t>(k), near.size());
    std::partial_sort(near.begin(), near.begin() + kk, near.end(),
                      [](const Near& a, const Near& b) { return a.d2 < b.d2; });

    if (near[0].d2 < 1e-24) return vectors[near[0].idx]; // coincident with an anchor

    double wsum = 0;
    Vec2 acc{0, 0};
    for (size_t m = 0; m < kk; ++m) {
        double d = std::sqrt(near[m].d2);
        double w = 1.0 / (std::pow(d, power) + 1e-6);
        acc.x += w * vectors[near[m].idx].x;
        acc.y += w * vectors[near[m].idx].y;
        wsum += w;
    }
    return {acc.x / wsum, acc.y / wsum};
}

template <bool Parallel>
std::vector<Vec2> interpolate_impl(const SparseField& field, const std::vector<Vec2>& points,
                                   int k, double power) {
    if (k < 1) throw DataError("interpolate_at: k must be >= 1");
    std::vector<size_t> valid_idx;
    for (size_t i = 0; i < field.anchors.size(); ++i)
        if (field.valid[i]) valid_idx.push_back(i);
    if (valid_idx.empty()) throw DataError("interpolate_at: no valid anchors");

    std::vector<Vec2> out(points.size());
    int n = static_cast<int>(points.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < n; ++i)
        out[i] = idw_at(field.anchors, field.vectors, valid_idx, points[i], k, power);
    return out;
}

} // namespace

std::vector<Vec2> interpolate_at(const SparseField& field, const std::vector<Vec2>& points,
                                 int k, double power) {
    return interpolate_impl<true>(field, points, k, power);
}

std::vector<Vec2> interpolate_at_serial(const SparseField& field, const std::vector<Vec2>& points,
                                        int k, double power) {
    return interpolate_impl<false>(field, points, k, power);
}

VesselMask warp_mask(const VesselMask& mask, const SparseField& field, const WarpParams& params) {
    std::vector<Vec2> set_pixels;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) set_pixels.push_back({double(x), double(y)});

    VesselMask out = make_mask(mask.width, mask.height, mask.kind);
    if (set_pixels.empty()) return out;

    std::vector<Vec2> disp = interpolate_at(field, set_pixels, params.k, params.power);
    for (size_t i = 0; i < set_pixels.size(); ++i) {
        int nx = static_cast<int>(std::lround(set_pixels[i].x + disp[i].x));
        int ny = static_cast<int>(std::lround(set_pixels[i].y + disp[i].y));
        if (out.in_bounds(nx, ny)) out.set(nx, ny);
    }
    return close3x3(out);
}

} // namespace mrc
