#include "mrc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mrc {

size_t PairSeries::valid_count() const {
    size_t n = 0;
    for (uint8_t v : valid_frames) n += v != 0;
    return n;
}

bool MrcModel::predictable(int i) const {
    for (int j = 0; j < n_non_vascular; ++j)
        if (w(i, j) > 0.0) return true;
    return false;
}

namespace {

struct AxisStats {
    double mean_x = 0, mean_y = 0, cov = 0, var_x = 0, var_y = 0;
    size_t n = 0;
};

AxisStats axis_stats(const PairSeries& s, bool x_axis) {
    AxisStats st;
    for (size_t m = 0; m < s.xs.size(); ++m) {
        if (!s.valid_frames[m]) continue;
        st.mean_x += x_axis ? s.xs[m].x : s.xs[m].y;
        st.mean_y += x_axis ? s.ys[m].x : s.ys[m].y;
        ++st.n;
    }
    if (st.n == 0) return st;
    st.mean_x /= st.n;
    st.mean_y /= st.n;
    for (size_t m = 0; m < s.xs.size(); ++m) {
        if (!s.valid_frames[m]) continue;
        double dx = (x_axis ? s.xs[m].x : s.xs[m].y) - st.mean_x;
        double dy = (x_axis ? s.ys[m].x : s.ys[m].y) - st.mean_y;
        st.cov += dx * dy;
        st.var_x += dx * dx;
        st.var_y += dy * dy;
    }
    // population (1/n) convention; the 1/n factors cancel in the ratio
    st.cov /= st.n;
    st.var_x /= st.n;
    st.var_y /= st.n;
    return st;
}

} // namespace

std::optional<double> pearson(const PairSeries& series) {
    if (series.valid_count() < 3) return std::nullopt;
    double rho = 1.0;
    for (bool axis : {true, false}) {
        AxisStats st = axis_stats(series, axis);
        if (st.var_x <= 0.0 || st.var_y <= 0.0) return std::nullopt;
        // clamp away rounding excursions so |rho| never exceeds 1
        rho *= std::clamp(st.cov / std::sqrt(st.var_x * st.var_y), -1.0, 1.0);
    }
    return rho;
}

PairFit fit_pair(const PairSeries& series) {
    if (series.valid_count() < 2) throw NumericError("fit_pair: fewer than 2 valid frames");
    PairFit fit;
    for (bool axis : {true, false}) {
        AxisStats st = axis_stats(series, axis);
        if (st.var_x <= 0.0) throw NumericError("fit_pair: constant predictor series");
        double a = st.cov / st.var_x;
        double b = st.mean_y - a * st.mean_x;
        if (axis) {
            fit.a.x = a;
            fit.b.x = b;
        } else {
            fit.a.y = a;
            fit.b.y = b;
        }
    }
    return fit;
}

PairSeries make_pair_series(const std::vector<FlowSet>& flows_n, const std::vector<FlowSet>& flows_v,
                            int j, int i) {
    PairSeries s;
    size_t k = flows_n.size();
    s.xs.resize(k);
    s.ys.resize(k);
    s.valid_frames.resize(k);
    for (size_t m = 0; m < k; ++m) {
        s.xs[m] = flows_n[m].displacements[j];
        s.ys[m] = flows_v[m].displacements[i];
        s.valid_frames[m] = flows_n[m].valid[j] && flows_v[m].valid[i];
    }
    return s;
}

MrcModel train(const std::vector<FlowSet>& train_flows_v, const std::vector<FlowSet>& train_flows_n,
               const CornerSet& corners, double rho_th) {
    if (train_flows_v.size() < 3) throw NumericError("train: need at least 3 training frames");
    if (train_flows_v.size() != train_flows_n.size())
        throw DataError("train: vascular/non-vascular frame count mismatch");
    if (rho_th <= 0.0 || rho_th > 1.0) throw ConfigError("train: rho_th must be in (0,1]");

    MrcModel model;
    model.n_vascular = static_cast<int>(corners.vascular.size());
    model.n_non_vascular = static_cast<int>(corners.non_vascular.size());
    model.rho_th = rho_th;
    model.corners = corners;
    size_t cells = static_cast<size_t>(model.n_vascular) * model.n_non_vascular;
    model.weights.assign(cells, 0.0);
    model.slopes.assign(cells, {0, 0});
    model.intercepts.assign(cells, {0, 0});

#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < model.n_vascular; ++i) {
        for (int j = 0; j < model.n_non_vascular; ++j) {
            PairSeries s = make_pair_series(train_flows_n, train_flows_v, j, i);
            auto rho = pearson(s);
            if (!rho || *rho <= rho_th) continue;
            PairFit fit = fit_pair(s);
            size_t idx = static_cast<size_t>(i) * model.n_non_vascular + j;
            model.weights[idx] = *rho;
            model.slopes[idx] = fit.a;
            model.intercepts[idx] = fit.b;
        }
        double sum = 0.0;
        for (int j = 0; j < model.n_non_vascular; ++j)
            sum += model.weights[static_cast<size_t>(i) * model.n_non_vascular + j];
        if (sum > 0.0)
            for (int j = 0; j < model.n_non_vascular; ++j)
                model.weights[static_cast<size_t>(i) * model.n_non_vascular + j] /= sum;
    }

    bool any = false;
    for (int i = 0; i < model.n_vascular && !any; ++i) any = model.predictable(i);
    if (!any) throw NumericError("training failure: no vascular corner has a correlated partner");
    return model;
}

FlowSet predict_plain(const MrcModel& model, const FlowSet& live_flow_n) {
    if (static_cast<int>(live_flow_n.size()) != model.n_non_vascular)
        throw DataError("predict: live flow not aligned with model corners");
    FlowSet out;
    out.target_index = live_flow_n.target_index;
    out.displacements.assign(model.n_vascular, {0, 0});
    out.valid.assign(model.n_vascular, 0);
    bool any_valid_live = false;
    for (uint8_t v : live_flow_n.valid) any_valid_live |= v != 0;
    if (!any_valid_live) throw NumericError("predict: all live tracks invalid");

    for (int i = 0; i < model.n_vascular; ++i) {
        double wsum = 0.0;
        Vec2 acc{0, 0};
        for (int j = 0; j < model.n_non_vascular; ++j) {
            double w = model.w(i, j);
            if (w <= 0.0 || !live_flow_n.valid[j]) continue;
            const Vec2& f = live_flow_n.displacements[j];
            const Vec2& a = model.a(i, j);
            const Vec2& b = model.b(i, j);
            acc.x += w * (a.x * f.x + b.x);
            acc.y += w * (a.y * f.y + b.y);
            wsum += w;
        }
        if (wsum > 0.0) {
            out.displacements[i] = {acc.x / wsum, acc.y / wsum};
            out.valid[i] = 1;
        }
    }
    return out;
}

// ---- serialization ----

namespace {

void put_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, void* p, size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw DataError(std::string("model file truncated reading ") + what);
}

void put_u32(std::ostream& out, uint32_t v) { put_bytes(out, &v, 4); }
void put_f64(std::ostream& out, double v) { put_bytes(out, &v, 8); }

uint32_t get_u32(std::istream& in, const char* what) {
    uint32_t v;
    get_bytes(in, &v, 4, what);
    return v;
}

double get_f64(std::istream& in, const char* what) {
    double v;
    get_bytes(in, &v, 8, what);
    return v;
}

} // namespace

void save_model(const MrcModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    put_bytes(out, "MRC1", 4);
    put_u32(out, static_cast<uint32_t>(model.n_vascular));
    put_u32(out, static_cast<uint32_t>(model.n_non_vascular));
    put_f64(out, model.rho_th);
    for (double w : model.weights) put_f64(out, w);
    for (const Vec2& v : model.slopes) {
        put_f64(out, v.x);
        put_f64(out, v.y);
    }
    for (const Vec2& v : model.intercepts) {
        put_f64(out, v.x);
        put_f64(out, v.y);
    }
    for (const Vec2& c : model.corners.vascular) {
        put_f64(out, c.x);
        put_f64(out, c.y);
    }
    for (const Vec2& c : model.corners.non_vascular) {
        put_f64(out, c.x);
        put_f64(out, c.y);
    }
    if (!out) throw DataError("short write to " + path.string());
}

MrcModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    get_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, "MRC1", 4) != 0) throw DataError(path.string() + ": not an MRC1 model");
    MrcModel model;
    model.n_vascular = static_cast<int>(get_u32(in, "n_vascular"));
    model.n_non_vascular = static_cast<int>(get_u32(in, "n_non_vascular"));
    model.rho_th = get_f64(in, "rho_th");
    size_t cells = static_cast<size_t>(model.n_vascular) * model.n_non_vascular;
    model.weights.resize(cells);
    model.slopes.resize(cells);
    model.intercepts.resize(cells);
    for (double& w : model.weights) w = get_f64(in, "weights");
    for (Vec2& v : model.slopes) {
        v.x = get_f64(in, "slopes");
        v.y = get_f64(in, "slopes");
    }
    for (Vec2& v : model.intercepts) {
        v.x = get_f64(in, "intercepts");
        v.y = get_f64(in, "intercepts");
    }
    model.corners.vascular.resize(model.n_vascular);
    model.corners.non_vascular.resize(model.n_non_vascular);
    for (Vec2& c : model.corners.vascular) {
        c.x = get_f64(in, "corners");
        c.y = get_f64(in, "corners");
    }
    for (Vec2& c : model.corners.non_vascular) {
        c.x = get_f64(in, "corners");
        c.y = get_f64(in, "corners");
    }
    return model;
}

} // namespace mrc
