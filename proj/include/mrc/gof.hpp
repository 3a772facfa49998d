#pragma once

#include "mrc/model.hpp"

namespace mrc {

struct CandidateSet {
    std::vector<Vec2> predictions; // one per non-vascular corner
    std::vector<uint8_t> active;   // selected by W and a valid live track

    size_t active_count() const;
};

struct GaussStats {
    Vec2 mu;
    Vec2 sigma;
};

// Per-pair affine predictions for vascular corner i from the live
// non-vascular flows.
CandidateSet candidates(const MrcModel& model, const FlowSet& live_flow_n, int i);

// Population mean and standard deviation per axis over active candidates.
GaussStats gauss_stats(const CandidateSet& cands);

struct GofResult {
    FlowSet flow;
    std::vector<uint8_t> degraded; // fell back to the unfiltered prediction
};

// 3-sigma screening of candidates, weight renormalization, weighted mean of
// survivors. Sigma components below 1e-9 are treated as perfect agreement
// (no deletion on that axis). Total deletion falls back to predict_plain for
// that corner, flagged degraded.
GofResult filter_predict(const MrcModel& model, const FlowSet& live_flow_n);

} // namespace mrc
