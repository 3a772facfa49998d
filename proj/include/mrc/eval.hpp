#pragma once

#include <functional>
#include <vector>

#include "mrc/image.hpp"

namespace mrc {

struct FrameScore {
    double R = 0.0;     // overlap ratio in [0,1]
    double MD = 0.0;    // mean nearest-point distance, millimeters
    int frame_index = 0;
    int n_gt_points = 0;
};

struct TimingReport {
    double learn_time_s = 0.0;
    std::vector<double> predict_times_s;

    double mean_predict_s() const;
};

// Zhang-Suen thinning to a 1-px centerline.
VesselMask thin(const VesselMask& mask);

// Fraction of gt centerline pixels covered by the warped mask. Throws
// DataError on empty gt.
double ratio_R(const VesselMask& gt_centerline, const VesselMask& warped_mask);

// Mean distance from each gt centerline point to the nearest point of the
// thinned warped mask, scaled by pixel spacing. Throws DataError when either
// centerline is empty.
double mean_distance(const VesselMask& gt_centerline, const VesselMask& warped_mask,
                     double pixel_spacing_mm);

// Wall-clock seconds for one invocation (monotonic clock).
double time_once(const std::function<void()>& runnable);

} // namespace mrc
