#pragma once

#include <filesystem>
#include <random>

#include "mrc/image.hpp"

namespace mrc::test {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("mrc_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Frame random_frame(int w, int h, std::mt19937_64& rng) {
    Frame f = make_frame(w, h);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& p : f.pixels) p = u(rng);
    return f;
}

// Smooth random texture with enough structure for tracking.
inline Frame textured_frame(int w, int h, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Frame noise = random_frame(w, h, rng);
    Frame out = make_frame(w, h);
    const int r = 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0;
            int n = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    s += noise.at(nx, ny);
                    ++n;
                }
            out.at(x, y) = static_cast<float>(0.2 + 0.6 * s / n);
        }
    }
    return out;
}

// Integer circular shift; content wraps around the frame edges.
inline Frame circular_shift(const Frame& f, int sx, int sy) {
    Frame out = make_frame(f.width, f.height);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            int ox = ((x - sx) % f.width + f.width) % f.width;
            int oy = ((y - sy) % f.height + f.height) % f.height;
            out.at(x, y) = f.at(ox, oy);
        }
    return out;
}

// Bilinear resample of f shifted by (dx, dy), border clamped.
inline Frame subpixel_shift(const Frame& f, double dx, double dy) {
    Frame out = make_frame(f.width, f.height);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            double sx = std::clamp(x - dx, 0.0, f.width - 1.0);
            double sy = std::clamp(y - dy, 0.0, f.height - 1.0);
            out.at(x, y) = static_cast<float>(f.sample(sx, sy));
        }
    return out;
}

} // namespace mrc::test
