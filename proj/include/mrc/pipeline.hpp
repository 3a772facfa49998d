#pragma once

#include <filesystem>
#include <optional>

#include "mrc/config.hpp"
#include "mrc/eval.hpp"
#include "mrc/gof.hpp"
#include "mrc/gpr.hpp"
#include "mrc/model.hpp"
#include "mrc/phantom.hpp"
#include "mrc/warp.hpp"

namespace mrc {

// Reference-frame corners plus their tracked flows over the contrasted
// (training) segment.
struct TrainingData {
    CornerSet corners;
    std::vector<FlowSet> flows_v; // per contrasted frame
    std::vector<FlowSet> flows_n;
};

// Detects corners on the reference frame (dense grid mode replaces the
// non-vascular set with grid points outside the dilated mask) and tracks
// both sets across the contrasted segment.
TrainingData collect_training_data(const FluoroSequence& seq, const VesselMask& mask,
                                   const RunConfig& cfg);

struct TrainedModel {
    std::optional<MrcModel> mrc;
    std::optional<GprEnsemble> gpr;
    double learn_time_s = 0.0;
};

TrainedModel train_regressor(const TrainingData& td, const RunConfig& cfg);

struct FrameResult {
    FlowSet predicted;   // vascular flow for this live frame
    VesselMask warped;   // warped reference mask
    double predict_time_s = 0.0; // tracking + prediction + warping
};

// Full per-frame path: track non-vascular corners, predict vascular motion
// (GOF per config), warp the mask.
FrameResult predict_frame(const TrainedModel& model, const CornerSet& corners,
                          const Pyramid& ref_pyr, const Frame& live, const VesselMask& ref_mask,
                          const RunConfig& cfg);

// Prediction from externally supplied non-vascular flows (truth-flow or
// corrupted-flow experiments).
FlowSet predict_from_flows(const TrainedModel& model, const FlowSet& live_flow_n,
                           const RunConfig& cfg);

SparseField to_sparse_field(const std::vector<Vec2>& anchors, const FlowSet& flow);

// Samples a dense truth-flow field at corner positions.
FlowSet flows_from_field(const FlowField& field, const std::vector<Vec2>& corners, int target_index);

void write_scores_csv(const std::vector<FrameScore>& scores,
                      const std::vector<double>& predict_times_s,
                      const std::filesystem::path& path);

} // namespace mrc
