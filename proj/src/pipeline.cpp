#include "mrc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mrc {

TrainingData collect_training_data(const FluoroSequence& seq, const VesselMask& mask,
                                   const RunConfig& cfg) {
    const Frame& ref = seq.reference();
    if (mask.width != ref.width || mask.height != ref.height)
        throw DataError("training: mask/frame dimension mismatch");

    TrainingData td;
    td.corners = detect_corners(ref, mask, cfg.corner);
    if (cfg.dense) {
        // dense ablation mode: non-vascular flow from a grid over the whole
        // frame, mask region excluded
        VesselMask dilated = dilate(mask, cfg.corner.mask_dilation);
        Rect roi{0, 0, ref.width, ref.height};
        auto grid = grid_points(roi, cfg.dense_stride, cfg.lk.window, ref.width, ref.height);
        td.corners.non_vascular.clear();
        for (const auto& p : grid)
            if (!dilated.at(static_cast<int>(p.x), static_cast<int>(p.y)))
                td.corners.non_vascular.push_back(p);
        if (td.corners.non_vascular.empty())
            throw DataError("training: dense grid left no non-vascular points");
    }

    Pyramid ref_pyr = build_pyramid(ref, cfg.lk.pyramid_levels);
    for (const Frame& f : seq.frames) {
        if (!f.contrasted) continue;
        Pyramid cur_pyr = build_pyramid(f, cfg.lk.pyramid_levels);
        FlowSet fv = track_sparse(ref_pyr, cur_pyr, td.corners.vascular, cfg.lk);
        FlowSet fn = track_sparse(ref_pyr, cur_pyr, td.corners.non_vascular, cfg.lk);
        fv.target_index = fn.target_index = f.index;
        td.flows_v.push_back(std::move(fv));
        td.flows_n.push_back(std::move(fn));
    }
    return td;
}

TrainedModel train_regressor(const TrainingData& td, const RunConfig& cfg) {
    TrainedModel tm;
    tm.learn_time_s = time_once([&] {
        if (cfg.regressor == Regressor::Mrc)
            tm.mrc = train(td.flows_v, td.flows_n, td.corners, cfg.rho_th);
        else
            tm.gpr = train_ensemble(td.flows_v, td.flows_n, td.corners, cfg.gpr_sigma_n,
                                    cfg.gpr_kernel, cfg.gpr_vbar_th);
    });
    return tm;
}

FlowSet predict_from_flows(const TrainedModel& model, const FlowSet& live_flow_n,
                           const RunConfig& cfg) {
    if (model.mrc) {
        if (cfg.gof) return filter_predict(*model.mrc, live_flow_n).flow;
        return predict_plain(*model.mrc, live_flow_n);
    }
    if (model.gpr) return predict_ensemble(*model.gpr, live_flow_n).flow;
    throw NumericError("predict: no trained model");
}

SparseField to_sparse_field(const std::vector<Vec2>& anchors, const FlowSet& flow) {
    SparseField sf;
    sf.anchors = anchors;
    sf.vectors = flow.displacements;
    sf.valid = flow.valid;
    return sf;
}

FrameResult predict_frame(const TrainedModel& model, const CornerSet& corners,
                          const Pyramid& ref_pyr, const Frame& live, const VesselMask& ref_mask,
                          const RunConfig& cfg) {
    FrameResult r;
    r.predict_time_s = time_once([&] {
        Pyramid cur_pyr = build_pyramid(live, cfg.lk.pyramid_levels);
        FlowSet fn = track_sparse(ref_pyr, cur_pyr, corners.non_vascular, cfg.lk);
        fn.target_index = live.index;
        r.predicted = predict_from_flows(model, fn, cfg);
        r.warped = warp_mask(ref_mask, to_sparse_field(corners.vascular, r.predicted), cfg.warp);
    });
    return r;
}

FlowSet flows_from_field(const FlowField& field, const std::vector<Vec2>& corners,
                         int target_index) {
    FlowSet f;
    f.target_index = target_index;
    f.displacements.reserve(corners.size());
    f.valid.assign(corners.size(), 1);
    for (const auto& c : corners) {
        int x = std::clamp(static_cast<int>(std::lround(c.x)), 0, field.width - 1);
        int y = std::clamp(static_cast<int>(std::lround(c.y)), 0, field.height - 1);
        f.displacements.push_back(field.at(x, y));
    }
    return f;
}

void write_scores_csv(const std::vector<FrameScore>& scores,
                      const std::vector<double>& predict_times_s,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "frame_index,R,MD_mm,predict_ms\n";
    auto row = [&](const char* label, double r, double md, double ms) {
        out << label << "," << r << "," << md << "," << ms << "\n";
    };
    char buf[32];
    std::vector<double> rs, mds;
    for (size_t i = 0; i < scores.size(); ++i) {
        double ms = i < predict_times_s.size() ? predict_times_s[i] * 1e3 : 0.0;
        std::snprintf(buf, sizeof(buf), "%d", scores[i].frame_index);
        row(buf, scores[i].R, scores[i].MD, ms);
        rs.push_back(scores[i].R);
        mds.push_back(scores[i].MD);
    }
    auto mean = [](std::vector<double> v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / v.size();
    };
    auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    std::vector<double> ms(predict_times_s);
    for (double& t : ms) t *= 1e3;
    row("mean", mean(rs), mean(mds), mean(ms));
    row("median", median(rs), median(mds), median(ms));
}

} // namespace mrc
