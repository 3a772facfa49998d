#pragma once

#include <filesystem>
#include <vector>

#include "mrc/features.hpp"
#include "mrc/tracking.hpp"

namespace mrc {

enum class GprKernel {
    AbsDist,    // c * exp(-|x-x'| / (2 eta^2))
    SquaredExp, // c * exp(-|x-x'|^2 / (2 eta^2))
};

double rbf(double x, double x2, double c, double eta, GprKernel kernel);

// One scalar GP: a (vascular, non-vascular) pair on one axis.
struct GprPairModel {
    std::vector<double> train_x;
    std::vector<double> train_y;
    double c = 1.0;
    double eta = 1.0;
    double sigma_n = 0.01;
    GprKernel kernel = GprKernel::AbsDist;
    bool trained = false;

    // Cholesky factor L of (K + sigma_n^2 I) and alpha = (K + sigma_n^2 I)^-1 y,
    // cached after factorize().
    std::vector<double> chol; // n x n lower triangular, row-major
    std::vector<double> alpha;
};

// Factorizes (K + sigma_n^2 I) with jitter escalation 1e-10 * 10^j up to
// 1e-6. Throws NumericError if all attempts fail.
void factorize(GprPairModel& m);

struct LmlResult {
    double value = 0.0;
    double grad_c = 0.0;   // d/dc
    double grad_eta = 0.0; // d/deta
};

LmlResult log_marginal_likelihood(const GprPairModel& m);

struct HyperParams {
    double c = 1.0;
    double eta = 1.0;
};

// Multi-start gradient ascent in log-parameter space; starts at
// {0.1,1,10} x (var(y)+eps) by {0.1,1,10} x (median |dx|+eps), <=200
// iterations each, convergence at |delta objective| < 1e-8.
HyperParams optimize_hyperparams(const std::vector<double>& train_x,
                                 const std::vector<double>& train_y,
                                 double sigma_n, GprKernel kernel = GprKernel::AbsDist);

struct GprPrediction {
    double mean = 0.0;
    double variance = 0.0; // clamped at >= 0
};

GprPrediction gpr_predict(const GprPairModel& m, double x_star);

struct GprEnsemble {
    int n_vascular = 0;
    int n_non_vascular = 0;
    double sigma_n = 0.01;
    double v_threshold = 0.0;
    GprKernel kernel = GprKernel::AbsDist;
    std::vector<GprPairModel> models; // n_v x n_n x 2, axis-major inner
    CornerSet corners;

    GprPairModel& at(int i, int j, int axis);
    const GprPairModel& at(int i, int j, int axis) const;
};

// Fits one GP per (i, j, axis) over jointly valid training frames. OpenMP
// across pairs. v_threshold set to the 95th percentile of leave-one-frame-out
// combined variances unless overridden.
GprEnsemble train_ensemble(const std::vector<FlowSet>& train_flows_v,
                           const std::vector<FlowSet>& train_flows_n,
                           const CornerSet& corners, double sigma_n,
                           GprKernel kernel = GprKernel::AbsDist,
                           double v_threshold_override = -1.0);

struct GprFramePrediction {
    FlowSet flow;
    std::vector<Vec2> combined_variance; // per vascular corner
};

// Inverse-variance weighted ensemble prediction with uncertainty deletion:
// a corner whose combined variance exceeds v_threshold on either axis is
// marked invalid. Variance floored at 1e-12 before the 1/v weighting.
GprFramePrediction predict_ensemble(const GprEnsemble& e, const FlowSet& live_flow_n);

// Magic "GPR1" binary serialization, bit-exact round trip.
void save_ensemble(const GprEnsemble& e, const std::filesystem::path& path);
GprEnsemble load_ensemble(const std::filesystem::path& path);

} // namespace mrc
