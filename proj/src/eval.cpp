#include "mrc/eval.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace mrc {

double TimingReport::mean_predict_s() const {
    if (predict_times_s.empty()) return 0.0;
    double s = 0;
    for (double t : predict_times_s) s += t;
    return s / predict_times_s.size();
}

VesselMask thin(const VesselMask& mask) {
    // Zhang-Suen iterative thinning
    VesselMask m = mask;
    m.kind = MaskKind::Centerline;
    auto p = [&](int x, int y) -> int { return m.in_bounds(x, y) ? m.at(x, y) : 0; };
    bool changed = true;
    std::vector<std::pair<int, int>> to_clear;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            to_clear.clear();
            for (int y = 0; y < m.height; ++y) {
                for (int x = 0; x < m.width; ++x) {
                    if (!p(x, y)) continue;
                    int p2 = p(x, y - 1), p3 = p(x + 1, y - 1), p4 = p(x + 1, y);
                    int p5 = p(x + 1, y + 1), p6 = p(x, y + 1), p7 = p(x - 1, y + 1);
                    int p8 = p(x - 1, y), p9 = p(x - 1, y - 1);
                    int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) + (p4 == 0 && p5 == 1) +
                            (p5 == 0 && p6 == 1) + (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                            (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
                    if (a != 1) continue;
                    if (pass == 0) {
                        if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
                    } else {
                        if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
                    }
                    to_clear.emplace_back(x, y);
                }
            }
            for (auto [x, y] : to_clear) m.set(x, y, 0);
            changed |= !to_clear.empty();
        }
    }
    return m;
}

double ratio_R(const VesselMask& gt_centerline, const VesselMask& warped_mask) {
    if (gt_centerline.width != warped_mask.width || gt_centerline.height != warped_mask.height)
        throw DataError("ratio_R: dimension mismatch");
    size_t total = 0, covered = 0;
    for (size_t i = 0; i < gt_centerline.bits.size(); ++i) {
        if (!gt_centerline.bits[i]) continue;
        ++total;
        covered += warped_mask.bits[i] != 0;
    }
    if (total == 0) throw DataError("ratio_R: empty ground-truth centerline");
    return static_cast<double>(covered) / static_cast<double>(total);
}

double mean_distance(const VesselMask& gt_centerline, const VesselMask& warped_mask,
                     double pixel_spacing_mm) {
    if (gt_centerline.width != warped_mask.width || gt_centerline.height != warped_mask.height)
        throw DataError("mean_distance: dimension mismatch");
    VesselMask skel = warped_mask.kind == MaskKind::Centerline ? warped_mask : thin(warped_mask);

    std::vector<Vec2> warped_pts;
    for (int y = 0; y < skel.height; ++y)
        for (int x = 0; x < skel.width; ++x)
            if (skel.at(x, y)) warped_pts.push_back({double(x), double(y)});
    if (warped_pts.empty()) throw DataError("mean_distance: empty warped centerline");

    double sum = 0;
    size_t n = 0;
    for (int y = 0; y < gt_centerline.height; ++y) {
        for (int x = 0; x < gt_centerline.width; ++x) {
            if (!gt_centerline.at(x, y)) continue;
            double best = std::numeric_limits<double>::max();
            for (const auto& q : warped_pts) {
                double dx = q.x - x, dy = q.y - y;
                best = std::min(best, dx * dx + dy * dy);
            }
            sum += std::sqrt(best);
            ++n;
        }
    }
    if (n == 0) throw DataError("mean_distance: empty ground-truth centerline");
    return sum / n * pixel_spacing_mm;
}

double time_once(const std::function<void()>& runnable) {
    auto t0 = std::chrono::steady_clock::now();
    runnable();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

} // namespace mrc
