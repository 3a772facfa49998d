#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mrc/eval.hpp"
#include "mrc/features.hpp"
#include "mrc/phantom.hpp"
#include "mrc/tracking.hpp"
#include "mrc/warp.hpp"

using namespace mrc;

namespace {

double best_of(int reps, const std::function<void()>& fn) {
    fn(); // warm-up
    double best = 1e30;
    for (int i = 0; i < reps; ++i) best = std::min(best, time_once(fn));
    return best;
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s serial %8.3f ms   openmp %8.3f ms   speedup %5.2fx\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns are serial\n");
#endif

    PhantomConfig cfg;
    cfg.width = 512;
    cfg.height = 512;
    cfg.contrasted_frames = 3;
    cfg.live_frames = 1;
    PhantomDataset ds = generate_phantom(cfg);
    const Frame& ref = ds.sequence.frames[0];
    const Frame& moved = ds.sequence.frames[2];

    report("min_eig_response 512x512",
           best_of(5, [&] { min_eig_response_serial(ref, 5); }),
           best_of(5, [&] { min_eig_response(ref, 5); }));

    CornerParams cp;
    cp.max_corners = 400;
    CornerSet corners = detect_corners(ref, ds.reference_mask, cp);
    std::vector<Vec2> all = corners.non_vascular;
    all.insert(all.end(), corners.vascular.begin(), corners.vascular.end());
    LkParams lk;
    std::printf("tracked corners: %zu\n", all.size());

    report("pyramidal LK",
           best_of(5, [&] { track_sparse_serial(ref, moved, all, lk); }),
           best_of(5, [&] { track_sparse(ref, moved, all, lk); }));

    FlowSet truth = [&] {
        FlowSet f;
        f.valid.assign(corners.vascular.size(), 1);
        for (const auto& c : corners.vascular)
            f.displacements.push_back(ds.truth_flows[2].at(static_cast<int>(c.x), static_cast<int>(c.y)));
        return f;
    }();
    SparseField field{corners.vascular, truth.displacements, truth.valid};
    std::vector<Vec2> pts;
    for (int y = 0; y < ref.height; y += 2)
        for (int x = 0; x < ref.width; x += 2) pts.push_back({double(x), double(y)});

    report("IDW interpolation",
           best_of(5, [&] { interpolate_at_serial(field, pts, 4, 2.0); }),
           best_of(5, [&] { interpolate_at(field, pts, 4, 2.0); }));
    return 0;
}
