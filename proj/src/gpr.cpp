#include "mrc/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace mrc {

double rbf(double x, double x2, double c, double eta, GprKernel kernel) {
    double r = std::abs(x - x2);
    double e = kernel == GprKernel::AbsDist ? r : r * r;
    return c * std::exp(-e / (2.0 * eta * eta));
}

namespace {

Eigen::MatrixXd kernel_matrix(const std::vector<double>& xs, double c, double eta,
                              GprKernel kernel) {
    int n = static_cast<int>(xs.size());
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            K(i, j) = K(j, i) = rbf(xs[i], xs[j], c, eta, kernel);
    return K;
}

// Cholesky of K + sigma_n^2 I with jitter escalation.
Eigen::LLT<Eigen::MatrixXd> factorize_matrix(const Eigen::MatrixXd& K, double sigma_n) {
    int n = static_cast<int>(K.rows());
    Eigen::MatrixXd A = K + sigma_n * sigma_n * Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    double jitter = 1e-10;
    while (llt.info() != Eigen::Success && jitter <= 1e-6) {
        llt.compute(A + jitter * Eigen::MatrixXd::Identity(n, n));
        jitter *= 10.0;
    }
    if (llt.info() != Eigen::Success)
        throw NumericError("GPR: kernel matrix not positive definite");
    return llt;
}

} // namespace

void factorize(GprPairModel& m) {
    if (m.c <= 0.0 || m.eta <= 0.0) throw NumericError("GPR: hyperparameters must be positive");
    int n = static_cast<int>(m.train_x.size());
    Eigen::MatrixXd K = kernel_matrix(m.train_x, m.c, m.eta, m.kernel);
    auto llt = factorize_matrix(K, m.sigma_n);
    Eigen::MatrixXd L = llt.matrixL();
    m.chol.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) m.chol[static_cast<size_t>(i) * n + j] = L(i, j);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(m.train_y.data(), n);
    Eigen::VectorXd alpha = llt.solve(y);
    m.alpha.assign(alpha.data(), alpha.data() + n);
}

LmlResult log_marginal_likelihood(const GprPairModel& m) {
    int n = static_cast<int>(m.train_x.size());
    Eigen::MatrixXd K = kernel_matrix(m.train_x, m.c, m.eta, m.kernel);
    auto llt = factorize_matrix(K, m.sigma_n);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(m.train_y.data(), n);
    Eigen::VectorXd alpha = llt.solve(y);

    double logdet = 0.0;
    Eigen::MatrixXd L = llt.matrixL();
    for (int i = 0; i < n; ++i) logdet += std::log(L(i, i));
    logdet *= 2.0;

    LmlResult res;
    res.value = -0.5 * logdet - 0.5 * y.dot(alpha) - 0.5 * n * std::log(2.0 * std::numbers::pi);

    // dL/dtheta = 0.5 tr((alpha alpha^T - A^-1) dK/dtheta)
    Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd M = alpha * alpha.transpose() - Ainv;
    Eigen::MatrixXd dK_dc = K / m.c;
    Eigen::MatrixXd dK_deta(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double r = std::abs(m.train_x[i] - m.train_x[j]);
            double e = m.kernel == GprKernel::AbsDist ? r : r * r;
            dK_deta(i, j) = K(i, j) * e / (m.eta * m.eta * m.eta);
        }
    }
    res.grad_c = 0.5 * (M.cwiseProduct(dK_dc)).sum();
    res.grad_eta = 0.5 * (M.cwiseProduct(dK_deta)).sum();
    return res;
}

HyperParams optimize_hyperparams(const std::vector<double>& train_x,
                                 const std::vector<double>& train_y, double sigma_n,
                                 GprKernel kernel) {
    if (train_x.size() < 3 || train_x.size() != train_y.size())
        throw NumericError("GPR: need at least 3 training points");

    double mean_y = 0;
    for (double y : train_y) mean_y += y;
    mean_y /= train_y.size();
    double var_y = 0;
    for (double y : train_y) var_y += (y - mean_y) * (y - mean_y);
    var_y /= train_y.size();

    std::vector<double> dists;
    for (size_t i = 0; i < train_x.size(); ++i)
        for (size_t j = i + 1; j < train_x.size(); ++j)
            dists.push_back(std::abs(train_x[i] - train_x[j]));
    std::sort(dists.begin(), dists.end());
    double med_dx = dists.empty() ? 1.0 : dists[dists.size() / 2];

    const double eps = 1e-3;
    double base_c = var_y + eps;
    double base_eta = med_dx + eps;

    GprPairModel probe;
    probe.train_x = train_x;
    probe.train_y = train_y;
    probe.sigma_n = sigma_n;
    probe.kernel = kernel;

    auto objective = [&](double log_c, double log_eta) -> LmlResult {
        probe.c = std::exp(log_c);
        probe.eta = std::exp(log_eta);
        LmlResult r = log_marginal_likelihood(probe);
        // chain rule into log space
        r.grad_c *= probe.c;
        r.grad_eta *= probe.eta;
        return r;
    };

    bool found = false;
    double best_obj = -1e300;
    HyperParams best;
    for (double fc : {0.1, 1.0, 10.0}) {
        for (double fe : {0.1, 1.0, 10.0}) {
            double lc = std::log(fc * base_c);
            double le = std::log(fe * base_eta);
            LmlResult cur;
            try {
                cur = objective(lc, le);
            } catch (const NumericError&) {
                continue;
            }
            double step = 0.1;
            for (int it = 0; it < 200; ++it) {
                double gnorm = std::hypot(cur.grad_c, cur.grad_eta);
                if (gnorm < 1e-12) break;
                // backtracking ascent step along the gradient
                bool accepted = false;
                while (step > 1e-12) {
                    double nlc = lc + step * cur.grad_c;
                    double nle = le + step * cur.grad_eta;
                    LmlResult next;
                    try {
                        next = objective(nlc, nle);
                    } catch (const NumericError&) {
                        step *= 0.5;
                        continue;
                    }
                    if (next.value >= cur.value) {
                        double gain = next.value - cur.value;
                        lc = nlc;
                        le = nle;
                        cur = next;
                        accepted = true;
                        step *= 1.5;
                        if (gain < 1e-8) it = 200; // converged
                        break;
                    }
                    step *= 0.5;
                }
                if (!accepted) break;
            }
            if (cur.value > best_obj) {
                best_obj = cur.value;
                best.c = std::exp(lc);
                best.eta = std::exp(le);
                found = true;
            }
        }
    }
    if (!found) throw NumericError("GPR: hyperparameter optimization failed at every start");
    return best;
}

GprPrediction gpr_predict(const GprPairModel& m, double x_star) {
    if (!m.trained || m.alpha.empty()) throw NumericError("GPR: model not trained");
    int n = static_cast<int>(m.train_x.size());
    Eigen::VectorXd ks(n);
    for (int i = 0; i < n; ++i) ks(i) = rbf(m.train_x[i], x_star, m.c, m.eta, m.kernel);

    GprPrediction p;
    for (int i = 0; i < n; ++i) p.mean += ks(i) * m.alpha[i];

    // v = L^-1 k*; variance = k** - v.v
    Eigen::VectorXd v = ks;
    for (int i = 0; i < n; ++i) {
        double s = v(i);
        for (int j = 0; j < i; ++j) s -= m.chol[static_cast<size_t>(i) * n + j] * v(j);
        v(i) = s / m.chol[static_cast<size_t>(i) * n + i];
    }
    double kss = rbf(x_star, x_star, m.c, m.eta, m.kernel);
    p.variance = std::max(0.0, kss - v.squaredNorm());
    return p;
}

GprPairModel& GprEnsemble::at(int i, int j, int axis) {
    return models[(static_cast<size_t>(i) * n_non_vascular + j) * 2 + axis];
}

const GprPairModel& GprEnsemble::at(int i, int j, int axis) const {
    return models[(static_cast<size_t>(i) * n_non_vascular + j) * 2 + axis];
}

namespace {

constexpr double kVarianceFloor = 1e-12;

// Closed-form leave-one-out predictive variances: var_i = 1 / (A^-1)_ii.
std::vector<double> loo_variances(const GprPairModel& m) {
    int n = static_cast<int>(m.train_x.size());
    Eigen::MatrixXd K = kernel_matrix(m.train_x, m.c, m.eta, m.kernel);
    auto llt = factorize_matrix(K, m.sigma_n);
    Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 / std::max(Ainv(i, i), kVarianceFloor);
    return v;
}

} // namespace

GprEnsemble train_ensemble(const std::vector<FlowSet>& train_flows_v,
                           const std::vector<FlowSet>& train_flows_n, const CornerSet& corners,
                           double sigma_n, GprKernel kernel, double v_threshold_override) {
    if (train_flows_v.size() < 3) throw NumericError("train_ensemble: need at least 3 training frames");
    if (train_flows_v.size() != train_flows_n.size())
        throw DataError("train_ensemble: frame count mismatch");

    GprEnsemble e;
    e.n_vascular = static_cast<int>(corners.vascular.size());
    e.n_non_vascular = static_cast<int>(corners.non_vascular.size());
    e.sigma_n = sigma_n;
    e.kernel = kernel;
    e.corners = corners;
    e.models.resize(static_cast<size_t>(e.n_vascular) * e.n_non_vascular * 2);

    int pairs = e.n_vascular * e.n_non_vascular;
#pragma omp parallel for schedule(dynamic, 1)
    for (int p = 0; p < pairs; ++p) {
        int i = p / e.n_non_vascular;
        int j = p % e.n_non_vascular;
        for (int axis = 0; axis < 2; ++axis) {
            GprPairModel& m = e.at(i, j, axis);
            m.sigma_n = sigma_n;
            m.kernel = kernel;
            for (size_t f = 0; f < train_flows_v.size(); ++f) {
                if (!train_flows_v[f].valid[i] || !train_flows_n[f].valid[j]) continue;
                const Vec2& x = train_flows_n[f].displacements[j];
                const Vec2& y = train_flows_v[f].displacements[i];
                m.train_x.push_back(axis == 0 ? x.x : x.y);
                m.train_y.push_back(axis == 0 ? y.x : y.y);
            }
            try {
                HyperParams hp = optimize_hyperparams(m.train_x, m.train_y, sigma_n, kernel);
                m.c = hp.c;
                m.eta = hp.eta;
                factorize(m);
                m.trained = true;
            } catch (const NumericError&) {
                m.trained = false;
            }
        }
    }

    bool any = false;
    for (const auto& m : e.models) any |= m.trained;
    if (!any) throw NumericError("train_ensemble: every pair failed to train");

    if (v_threshold_override >= 0.0) {
        e.v_threshold = v_threshold_override;
    } else {
        // 95th percentile of leave-one-frame-out combined variances
        std::vector<double> combined;
        for (int i = 0; i < e.n_vascular; ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                // per-frame inverse-variance combination across pairs
                std::vector<std::vector<double>> per_pair;
                for (int j = 0; j < e.n_non_vascular; ++j) {
                    const GprPairModel& m = e.at(i, j, axis);
                    if (!m.trained) continue;
                    per_pair.push_back(loo_variances(m));
                }
                if (per_pair.empty()) continue;
                size_t frames = per_pair[0].size();
                for (auto& v : per_pair) frames = std::min(frames, v.size());
                for (size_t f = 0; f < frames; ++f) {
                    double wsum = 0, acc = 0;
                    for (const auto& v : per_pair) {
                        double w = 1.0 / std::max(v[f], kVarianceFloor);
                        acc += w * v[f];
                        wsum += w;
                    }
                    combined.push_back(acc / wsum);
                }
            }
        }
        if (combined.empty()) throw NumericError("train_ensemble: no variances to calibrate v_th");
        std::sort(combined.begin(), combined.end());
        size_t idx = static_cast<size_t>(std::ceil(0.95 * combined.size()));
        e.v_threshold = combined[std::min(idx, combined.size() - 1)];
    }
    return e;
}

GprFramePrediction predict_ensemble(const GprEnsemble& e, const FlowSet& live_flow_n) {
    if (static_cast<int>(live_flow_n.size()) != e.n_non_vascular)
        throw DataError("predict_ensemble: live flow not aligned with ensemble corners");

    GprFramePrediction out;
    out.flow.target_index = live_flow_n.target_index;
    out.flow.displacements.assign(e.n_vascular, {0, 0});
    out.flow.valid.assign(e.n_vascular, 0);
    out.combined_variance.assign(e.n_vascular, {0, 0});

    for (int i = 0; i < e.n_vascular; ++i) {
        double pred[2] = {0, 0}, vbar[2] = {0, 0};
        bool ok = true;
        for (int axis = 0; axis < 2 && ok; ++axis) {
            double wsum = 0, acc = 0, vacc = 0;
            for (int j = 0; j < e.n_non_vascular; ++j) {
                const GprPairModel& m = e.at(i, j, axis);
                if (!m.trained || !live_flow_n.valid[j]) continue;
                const Vec2& f = live_flow_n.displacements[j];
                GprPrediction p = gpr_predict(m, axis == 0 ? f.x : f.y);
                double v = std::max(p.variance, kVarianceFloor);
                double w = 1.0 / v;
                acc += w * p.mean;
                vacc += w * p.variance;
                wsum += w;
            }
            if (wsum <= 0) {
                ok = false;
                break;
            }
            pred[axis] = acc / wsum;
            vbar[axis] = vacc / wsum; // W^T V with normalized weights
        }
        if (!ok) continue;
        out.combined_variance[i] = {vbar[0], vbar[1]};
        if (vbar[0] > e.v_threshold || vbar[1] > e.v_threshold) continue; // deleted
        out.flow.displacements[i] = {pred[0], pred[1]};
        out.flow.valid[i] = 1;
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
    if (!in) throw DataError(std::string("ensemble file truncated reading ") + what);
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

void save_ensemble(const GprEnsemble& e, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    put_bytes(out, "GPR1", 4);
    put_u32(out, static_cast<uint32_t>(e.n_vascular));
    put_u32(out, static_cast<uint32_t>(e.n_non_vascular));
    put_u32(out, e.kernel == GprKernel::AbsDist ? 0u : 1u);
    put_f64(out, e.sigma_n);
    put_f64(out, e.v_threshold);
    for (const auto& m : e.models) {
        put_u32(out, m.trained ? 1u : 0u);
        put_u32(out, static_cast<uint32_t>(m.train_x.size()));
        put_f64(out, m.c);
        put_f64(out, m.eta);
        for (double x : m.train_x) put_f64(out, x);
        for (double y : m.train_y) put_f64(out, y);
    }
    for (const Vec2& c : e.corners.vascular) {
        put_f64(out, c.x);
        put_f64(out, c.y);
    }
    for (const Vec2& c : e.corners.non_vascular) {
        put_f64(out, c.x);
        put_f64(out, c.y);
    }
    if (!out) throw DataError("short write to " + path.string());
}

GprEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    get_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, "GPR1", 4) != 0) throw DataError(path.string() + ": not a GPR1 ensemble");
    GprEnsemble e;
    e.n_vascular = static_cast<int>(get_u32(in, "n_vascular"));
    e.n_non_vascular = static_cast<int>(get_u32(in, "n_non_vascular"));
    e.kernel = get_u32(in, "kernel") == 0 ? GprKernel::AbsDist : GprKernel::SquaredExp;
    e.sigma_n = get_f64(in, "sigma_n");
    e.v_threshold = get_f64(in, "v_threshold");
    e.models.resize(static_cast<size_t>(e.n_vascular) * e.n_non_vascular * 2);
    for (auto& m : e.models) {
        m.trained = get_u32(in, "trained") != 0;
        uint32_t k = get_u32(in, "k");
        m.c = get_f64(in, "c");
        m.eta = get_f64(in, "eta");
        m.sigma_n = e.sigma_n;
        m.kernel = e.kernel;
        m.train_x.resize(k);
        m.train_y.resize(k);
        for (double& x : m.train_x) x = get_f64(in, "train_x");
        for (double& y : m.train_y) y = get_f64(in, "train_y");
        if (m.trained) factorize(m);
    }
    e.corners.vascular.resize(e.n_vascular);
    e.corners.non_vascular.resize(e.n_non_vascular);
    for (Vec2& c : e.corners.vascular) {
        c.x = get_f64(in, "corners");
        c.y = get_f64(in, "corners");
    }
    for (Vec2& c : e.corners.non_vascular) {
        c.x = get_f64(in, "corners");
        c.y = get_f64(in, "corners");
    }
    return e;
}

} // namespace mrc
