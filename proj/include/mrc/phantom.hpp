#pragma once

#include <filesystem>
#include <vector>

#include "mrc/image.hpp"

namespace mrc {

struct PhantomConfig {
    int width = 256;
    int height = 256;
    double amplitude_px = 8.0;   // A
    double period_frames = 16.0; // T
    double gamma = 0.5;          // vertical gradient in [0,1]
    double phase = 0.5;          // y-axis phase offset, radians
    int contrasted_frames = 12;
    int live_frames = 20;
    uint64_t seed = 1;
    double pixel_spacing_mm = 1.0;
    double vessel_radius_px = 2.5;
    double vessel_darkness = 0.45; // intensity drop applied on vessel pixels
};

// Dense displacement field for one frame: d[p] maps a reference pixel to its
// position in that frame.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<Vec2> d;

    const Vec2& at(int x, int y) const { return d[static_cast<size_t>(y) * width + x]; }
};

struct PhantomDataset {
    FluoroSequence sequence;
    std::vector<FlowField> truth_flows;        // one per frame, zero at the reference
    VesselMask reference_mask;                 // thick mask on the reference frame
    VesselMask reference_centerline;           // 1-px centerline on the reference frame
    std::vector<VesselMask> gt_centerlines;    // one per live frame, by truth-flow displacement
};

// Analytic displacement of reference pixel (x,y) at frame offset t
// (t counted relative to the reference frame).
Vec2 phantom_displacement(const PhantomConfig& cfg, double x, double y, double t);

PhantomDataset generate_phantom(const PhantomConfig& cfg);

// On-disk layout: frames as 8-bit PGM, masks as PGM, truth flows as raw
// little-endian f64 pairs, manifest + phantom config echoed as key=value.
void save_phantom(const PhantomDataset& ds, const std::filesystem::path& dir);
FlowField load_flow_field(const std::filesystem::path& path);
void save_flow_field(const FlowField& f, const std::filesystem::path& path);

PhantomConfig phantom_config_from_file(const std::filesystem::path& path);

} // namespace mrc
