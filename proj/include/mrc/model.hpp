#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "mrc/features.hpp"
#include "mrc/tracking.hpp"

namespace mrc {

// Paired displacement histories of one (vascular, non-vascular) corner pair
// over the k training frames.
struct PairSeries {
    std::vector<Vec2> xs; // non-vascular
    std::vector<Vec2> ys; // vascular
    std::vector<uint8_t> valid_frames;

    size_t valid_count() const;
};

// Per-axis affine fit y = a*x + b.
struct PairFit {
    Vec2 a; // slope per axis
    Vec2 b; // intercept per axis
};

struct MrcModel {
    int n_vascular = 0;
    int n_non_vascular = 0;
    double rho_th = 0.9;
    std::vector<double> weights;  // n_v x n_n row-major, rows normalized
    std::vector<Vec2> slopes;     // n_v x n_n (L_A)
    std::vector<Vec2> intercepts; // n_v x n_n (L_B)
    CornerSet corners;

    double w(int i, int j) const { return weights[static_cast<size_t>(i) * n_non_vascular + j]; }
    const Vec2& a(int i, int j) const { return slopes[static_cast<size_t>(i) * n_non_vascular + j]; }
    const Vec2& b(int i, int j) const { return intercepts[static_cast<size_t>(i) * n_non_vascular + j]; }
    bool predictable(int i) const;
};

// Product of per-axis Pearson coefficients over jointly valid frames,
// population covariance. nullopt when fewer than 3 valid frames or an axis
// series is constant; callers treat that as rho = 0.
std::optional<double> pearson(const PairSeries& series);

// Per-axis ordinary least squares by the closed-form normal equations.
// Throws NumericError on constant x.
PairFit fit_pair(const PairSeries& series);

PairSeries make_pair_series(const std::vector<FlowSet>& flows_n, const std::vector<FlowSet>& flows_v,
                            int j, int i);

// Pearson-gated per-pair fits with row normalization. Throws NumericError
// when no vascular corner gets a nonzero row.
MrcModel train(const std::vector<FlowSet>& train_flows_v, const std::vector<FlowSet>& train_flows_n,
               const CornerSet& corners, double rho_th);

// Weighted per-pair affine prediction; weights renormalized over valid live
// tracks per frame. Unpredictable rows come back invalid.
FlowSet predict_plain(const MrcModel& model, const FlowSet& live_flow_n);

// Versioned binary serialization, magic "MRC1", little-endian f64 payload.
void save_model(const MrcModel& model, const std::filesystem::path& path);
MrcModel load_model(const std::filesystem::path& path);

} // namespace mrc
