#include "mrc/gof.hpp"

#include <cmath>

namespace mrc {

size_t CandidateSet::active_count() const {
    size_t n = 0;
    for (uint8_t a : active) n += a != 0;
    return n;
}

CandidateSet candidates(const MrcModel& model, const FlowSet& live_flow_n, int i) {
    if (static_cast<int>(live_flow_n.size()) != model.n_non_vascular)
        throw DataError("candidates: live flow not aligned with model corners");
    if (!model.predictable(i)) throw NumericError("candidates: vascular corner has no selected pairs");
    CandidateSet cs;
    cs.predictions.assign(model.n_non_vascular, {0, 0});
    cs.active.assign(model.n_non_vascular, 0);
    for (int j = 0; j < model.n_non_vascular; ++j) {
        if (model.w(i, j) <= 0.0 || !live_flow_n.valid[j]) continue;
        const Vec2& f = live_flow_n.displacements[j];
        const Vec2& a = model.a(i, j);
        const Vec2& b = model.b(i, j);
        cs.predictions[j] = {a.x * f.x + b.x, a.y * f.y + b.y};
        cs.active[j] = 1;
    }
    if (cs.active_count() == 0) throw NumericError("candidates: no active pair for this corner");
    return cs;
}

GaussStats gauss_stats(const CandidateSet& cands) {
    size_t n = cands.active_count();
    if (n == 0) throw NumericError("gauss_stats: no active candidates");
    GaussStats st;
    for (size_t j = 0; j < cands.predictions.size(); ++j) {
        if (!cands.active[j]) continue;
        st.mu.x += cands.predictions[j].x;
        st.mu.y += cands.predictions[j].y;
    }
    st.mu.x /= n;
    st.mu.y /= n;
    double vx = 0, vy = 0;
    for (size_t j = 0; j < cands.predictions.size(); ++j) {
        if (!cands.active[j]) continue;
        vx += (cands.predictions[j].x - st.mu.x) * (cands.predictions[j].x - st.mu.x);
        vy += (cands.predictions[j].y - st.mu.y) * (cands.predictions[j].y - st.mu.y);
    }
    st.sigma = {std::sqrt(vx / n), std::sqrt(vy / n)};
    return st;
}

GofResult filter_predict(const MrcModel& model, const FlowSet& live_flow_n) {
    GofResult res;
    res.flow.target_index = live_flow_n.target_index;
    res.flow.displacements.assign(model.n_vascular, {0, 0});
    res.flow.valid.assign(model.n_vascular, 0);
    res.degraded.assign(model.n_vascular, 0);

    constexpr double kSigmaFloor = 1e-9; // zero spread means agreement, not outliers

    // candidate buffers hoisted out of the corner loop: this path runs per
    // live frame, so per-corner allocations dominate otherwise
    std::vector<Vec2> pred(model.n_non_vascular);
    std::vector<uint8_t> act(model.n_non_vascular);

    for (int i = 0; i < model.n_vascular; ++i) {
        if (!model.predictable(i)) continue;

        int n_active = 0;
        Vec2 sum{0, 0};
        for (int j = 0; j < model.n_non_vascular; ++j) {
            act[j] = 0;
            if (model.w(i, j) <= 0.0 || !live_flow_n.valid[j]) continue;
            const Vec2& f = live_flow_n.displacements[j];
            const Vec2& a = model.a(i, j);
            const Vec2& b = model.b(i, j);
            pred[j] = {a.x * f.x + b.x, a.y * f.y + b.y};
            act[j] = 1;
            ++n_active;
            sum.x += pred[j].x;
            sum.y += pred[j].y;
        }
        if (n_active == 0) continue; // no valid live track among selected pairs
        GaussStats st;
        st.mu = {sum.x / n_active, sum.y / n_active};
        double vx = 0, vy = 0;
        // second pass: spread of the candidates plus the unfiltered weighted
        // mean (matching predict_plain), kept as the total-deletion fallback
        double plain_wsum = 0.0;
        Vec2 plain_acc{0, 0};
        for (int j = 0; j < model.n_non_vascular; ++j) {
            if (!act[j]) continue;
            vx += (pred[j].x - st.mu.x) * (pred[j].x - st.mu.x);
            vy += (pred[j].y - st.mu.y) * (pred[j].y - st.mu.y);
            double w = model.w(i, j);
            plain_acc.x += w * pred[j].x;
            plain_acc.y += w * pred[j].y;
            plain_wsum += w;
        }
        st.sigma = {std::sqrt(vx / n_active), std::sqrt(vy / n_active)};

        double wsum = 0.0;
        Vec2 acc{0, 0};
        for (int j = 0; j < model.n_non_vascular; ++j) {
            if (!act[j]) continue;
            const Vec2& p = pred[j];
            bool out_x = st.sigma.x >= kSigmaFloor &&
                         (p.x <= st.mu.x - 3.0 * st.sigma.x || p.x >= st.mu.x + 3.0 * st.sigma.x);
            bool out_y = st.sigma.y >= kSigmaFloor &&
                         (p.y <= st.mu.y - 3.0 * st.sigma.y || p.y >= st.mu.y + 3.0 * st.sigma.y);
            if (out_x || out_y) continue;
            double w = model.w(i, j);
            acc.x += w * p.x;
            acc.y += w * p.y;
            wsum += w;
        }
        if (wsum > 0.0) {
            res.flow.displacements[i] = {acc.x / wsum, acc.y / wsum};
            res.flow.valid[i] = 1;
        } else {
            // every candidate was screened out: fall back to the unfiltered prediction
            res.flow.displacements[i] = {plain_acc.x / plain_wsum, plain_acc.y / plain_wsum};
            res.flow.valid[i] = 1;
            res.degraded[i] = 1;
        }
    }
    return res;
}

} // namespace mrc
