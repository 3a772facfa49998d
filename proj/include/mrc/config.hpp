#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mrc/features.hpp"
#include "mrc/gpr.hpp"
#include "mrc/tracking.hpp"
#include "mrc/warp.hpp"

namespace mrc {

// UTF-8 key=value file; '#' starts a comment, blank lines ignored.
std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

enum class Regressor { Mrc, Gpr };

struct RunConfig {
    // corners
    CornerParams corner;
    // tracking
    LkParams lk;
    // model
    double rho_th = 0.9;
    Regressor regressor = Regressor::Mrc;
    bool gof = true;
    // dense ablation mode
    bool dense = false;
    int dense_stride = 4;
    // gpr
    double gpr_sigma_n = 0.01;
    GprKernel gpr_kernel = GprKernel::AbsDist;
    double gpr_vbar_th = -1.0; // <0: derive from training data
    // warp
    WarpParams warp;
    // run control
    uint64_t seed = 1;
    int threads = 0; // 0: library default

    // Applies recognized keys from a kv map; throws ConfigError on unknown
    // keys or unparsable values.
    void apply(const std::map<std::string, std::string>& kv);
};

} // namespace mrc
