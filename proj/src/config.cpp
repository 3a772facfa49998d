#include "mrc/config.hpp"

#include <fstream>
#include <sstream>

#include "mrc/errors.hpp"

namespace mrc {

static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_kv_text(ss.str());
}

template <typename T>
static T parse_num(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        if constexpr (std::is_same_v<T, int>) {
            int v = std::stoi(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return v;
        } else if constexpr (std::is_same_v<T, uint64_t>) {
            unsigned long long v = std::stoull(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return static_cast<uint64_t>(v);
        } else {
            double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return v;
        }
    } catch (const std::exception&) {
        throw ConfigError("bad value for " + key + ": '" + value + "'");
    }
}

static bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw ConfigError("bad value for " + key + ": '" + value + "' (want on|off)");
}

void RunConfig::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "max_corners") corner.max_corners = parse_num<int>(key, value);
        else if (key == "quality_level") corner.quality_level = parse_num<double>(key, value);
        else if (key == "min_distance") corner.min_distance = parse_num<double>(key, value);
        else if (key == "block_size") corner.block_size = parse_num<int>(key, value);
        else if (key == "mask_dilation") corner.mask_dilation = parse_num<int>(key, value);
        else if (key == "corner_margin") corner.margin = parse_num<int>(key, value);
        else if (key == "lk_window") lk.window = parse_num<int>(key, value);
        else if (key == "lk_levels") lk.pyramid_levels = parse_num<int>(key, value);
        else if (key == "lk_iters") lk.max_iterations = parse_num<int>(key, value);
        else if (key == "lk_eps") lk.epsilon = parse_num<double>(key, value);
        else if (key == "lk_min_eig") lk.min_eig_threshold = parse_num<double>(key, value);
        else if (key == "rho_th") rho_th = parse_num<double>(key, value);
        else if (key == "gof") gof = parse_bool(key, value);
        else if (key == "dense") dense = parse_bool(key, value);
        else if (key == "dense_stride") dense_stride = parse_num<int>(key, value);
        else if (key == "regressor") {
            if (value == "mrc") regressor = Regressor::Mrc;
            else if (value == "gpr") regressor = Regressor::Gpr;
            else throw ConfigError("bad value for regressor: '" + value + "' (want mrc|gpr)");
        } else if (key == "gpr_sigma_n") gpr_sigma_n = parse_num<double>(key, value);
        else if (key == "gpr_kernel") {
            if (value == "paper") gpr_kernel = GprKernel::AbsDist;
            else if (value == "squared") gpr_kernel = GprKernel::SquaredExp;
            else throw ConfigError("bad value for gpr_kernel: '" + value + "' (want paper|squared)");
        } else if (key == "gpr_vbar_th") gpr_vbar_th = parse_num<double>(key, value);
        else if (key == "warp_k") warp.k = parse_num<int>(key, value);
        else if (key == "warp_power") warp.power = parse_num<double>(key, value);
        else if (key == "seed") seed = parse_num<uint64_t>(key, value);
        else if (key == "threads") threads = parse_num<int>(key, value);
        else throw ConfigError("unknown config key: " + key);
    }
    if (corner.quality_level <= 0.0 || corner.quality_level >= 1.0)
        throw ConfigError("quality_level must be in (0,1)");
    if (corner.min_distance < 1.0) throw ConfigError("min_distance must be >= 1");
    if (lk.window < 5 || lk.window % 2 == 0) throw ConfigError("lk_window must be odd and >= 5");
    if (lk.pyramid_levels < 1) throw ConfigError("lk_levels must be >= 1");
    if (rho_th <= 0.0 || rho_th > 1.0) throw ConfigError("rho_th must be in (0,1]");
    if (warp.k < 1) throw ConfigError("warp_k must be >= 1");
}

} // namespace mrc
