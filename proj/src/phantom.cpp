#include "mrc/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "mrc/config.hpp"

namespace mrc {

Vec2 phantom_displacement(const PhantomConfig& cfg, double /*x*/, double y, double t) {
    double m = cfg.amplitude_px * (cfg.gamma + (1.0 - cfg.gamma) * y / cfg.height);
    double w = 2.0 * std::numbers::pi * t / cfg.period_frames;
    return {m * std::sin(w), 0.4 * m * std::sin(w + cfg.phase)};
}

// ---- vessel tree ----

namespace {

struct Segment {
    Vec2 a, b;
};

double point_segment_dist(const Vec2& p, const Segment& s) {
    Vec2 d = s.b - s.a;
    double len2 = d.x * d.x + d.y * d.y;
    double t = len2 > 0 ? ((p.x - s.a.x) * d.x + (p.y - s.a.y) * d.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double dx = p.x - (s.a.x + t * d.x), dy = p.y - (s.a.y + t * d.y);
    return std::sqrt(dx * dx + dy * dy);
}

void grow_branch(std::vector<Segment>& segs, std::mt19937_64& rng, Vec2 start, double angle,
                 double remaining, int depth, const PhantomConfig& cfg) {
    std::uniform_real_distribution<double> drift(-0.35, 0.35);
    std::uniform_real_distribution<double> step_len(12.0, 22.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double margin = 14.0;
    Vec2 p = start;
    while (remaining > 0) {
        double len = std::min(step_len(rng), remaining);
        angle += drift(rng);
        // keep growth pointed broadly downward
        angle = std::clamp(angle, -1.1, 1.1);
        Vec2 q{p.x + len * std::sin(angle), p.y + len * std::cos(angle)};
        q.x = std::clamp(q.x, margin, cfg.width - 1.0 - margin);
        q.y = std::clamp(q.y, margin, cfg.height - 1.0 - margin);
        segs.push_back({p, q});
        remaining -= len;
        if (depth < 3 && remaining > 25.0 && unit(rng) < 0.45) {
            double side = unit(rng) < 0.5 ? -0.55 : 0.55;
            grow_branch(segs, rng, q, angle + side, remaining * 0.7, depth + 1, cfg);
        }
        p = q;
        if (p.y >= cfg.height - 1.0 - margin) break;
    }
}

std::vector<Segment> make_vessel_tree(const PhantomConfig& cfg, std::mt19937_64& rng) {
    std::vector<Segment> segs;
    std::uniform_real_distribution<double> xoff(-0.08 * cfg.width, 0.08 * cfg.width);
    Vec2 root{cfg.width * 0.5 + xoff(rng), 16.0};
    grow_branch(segs, rng, root, 0.0, cfg.height * 1.2, 0, cfg);
    return segs;
}

// distance from p to the nearest tree segment (small trees, direct scan)
double tree_distance(const std::vector<Segment>& segs, const Vec2& p) {
    double best = 1e30;
    for (const auto& s : segs) best = std::min(best, point_segment_dist(p, s));
    return best;
}

Frame make_texture(const PhantomConfig& cfg, std::mt19937_64& rng) {
    Frame noise = make_frame(cfg.width, cfg.height);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& p : noise.pixels) p = u(rng);
    // three box-blur passes, radius 2 -> band-limited blobs smooth enough for
    // low bilinear-resampling error yet still trackable
    auto blur = [&](const Frame& in) {
        Frame out = make_frame(in.width, in.height);
        const int r = 2;
        for (int y = 0; y < in.height; ++y) {
            for (int x = 0; x < in.width; ++x) {
                double s = 0;
                int n = 0;
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= in.width || ny >= in.height) continue;
                        s += in.at(nx, ny);
                        ++n;
                    }
                }
                out.at(x, y) = static_cast<float>(s / n);
            }
        }
        return out;
    };
    Frame t = blur(blur(blur(noise)));
    float lo = 1e9f, hi = -1e9f;
    for (float p : t.pixels) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    float span = std::max(hi - lo, 1e-9f);
    for (auto& p : t.pixels) p = 0.25f + 0.60f * (p - lo) / span;
    return t;
}

// Solve s = d(q - s, t) so that content at p = q - s lands at q = p + d(p, t).
Vec2 inverse_displacement(const PhantomConfig& cfg, double qx, double qy, double t) {
    Vec2 s{0, 0};
    for (int it = 0; it < 8; ++it)
        s = phantom_displacement(cfg, qx - s.x, qy - s.y, t);
    return s;
}

Frame warp_base(const Frame& base, const PhantomConfig& cfg, double t) {
    Frame out = make_frame(base.width, base.height);
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            Vec2 s = inverse_displacement(cfg, x, y, t);
            double sx = std::clamp(x - s.x, 0.0, base.width - 1.0);
            double sy = std::clamp(y - s.y, 0.0, base.height - 1.0);
            out.at(x, y) = static_cast<float>(base.sample(sx, sy));
        }
    }
    return out;
}

} // namespace

PhantomDataset generate_phantom(const PhantomConfig& cfg) {
    if (cfg.width < 32 || cfg.height < 32) throw ConfigError("phantom: image too small");
    if (cfg.amplitude_px < 0) throw ConfigError("phantom: negative amplitude");
    if (cfg.amplitude_px >= std::min(cfg.width, cfg.height) / 4.0)
        throw ConfigError("phantom: amplitude would move content out of frame");
    if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("phantom: gamma must be in [0,1]");
    if (cfg.period_frames <= 0) throw ConfigError("phantom: period must be positive");
    if (cfg.contrasted_frames < 3) throw ConfigError("phantom: need at least 3 contrasted frames");
    if (cfg.live_frames < 1) throw ConfigError("phantom: need at least 1 live frame");

    std::mt19937_64 rng(cfg.seed);
    auto tree = make_vessel_tree(cfg, rng);
    Frame texture = make_texture(cfg, rng);

    // reference mask, centerline, and contrasted base image
    VesselMask mask = make_mask(cfg.width, cfg.height, MaskKind::Mask);
    VesselMask centerline = make_mask(cfg.width, cfg.height, MaskKind::Centerline);
    Frame contrasted_base = texture;
    for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
            double d = tree_distance(tree, {double(x), double(y)});
            if (d <= cfg.vessel_radius_px) mask.set(x, y);
            if (d <= 0.5) centerline.set(x, y);
            // smooth vessel profile so edges stay trackable
            double prof = std::clamp(cfg.vessel_radius_px + 1.0 - d, 0.0, 1.0);
            if (prof > 0) {
                float& p = contrasted_base.at(x, y);
                p = static_cast<float>(std::clamp(p - cfg.vessel_darkness * prof, 0.0, 1.0));
            }
        }
    }

    PhantomDataset ds;
    ds.reference_mask = mask;
    ds.reference_centerline = centerline;
    ds.sequence.reference_index = 0;
    ds.sequence.pixel_spacing_mm = cfg.pixel_spacing_mm;

    int total = cfg.contrasted_frames + cfg.live_frames;
    for (int i = 0; i < total; ++i) {
        double t = i - ds.sequence.reference_index;
        bool contrasted = i < cfg.contrasted_frames;
        const Frame& base = contrasted ? contrasted_base : texture;
        Frame f = (t == 0.0) ? base : warp_base(base, cfg, t);
        f.index = i;
        f.contrasted = contrasted;
        ds.sequence.frames.push_back(std::move(f));

        FlowField ff;
        ff.width = cfg.width;
        ff.height = cfg.height;
        ff.d.resize(static_cast<size_t>(cfg.width) * cfg.height);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x)
                ff.d[static_cast<size_t>(y) * cfg.width + x] =
                    (t == 0.0) ? Vec2{0, 0} : phantom_displacement(cfg, x, y, t);
        ds.truth_flows.push_back(std::move(ff));

        if (!contrasted) {
            VesselMask gt = make_mask(cfg.width, cfg.height, MaskKind::Centerline);
            const FlowField& ff2 = ds.truth_flows.back();
            for (int y = 0; y < cfg.height; ++y) {
                for (int x = 0; x < cfg.width; ++x) {
                    if (!centerline.at(x, y)) continue;
                    Vec2 d = ff2.at(x, y);
                    int nx = static_cast<int>(std::lround(x + d.x));
                    int ny = static_cast<int>(std::lround(y + d.y));
                    if (gt.in_bounds(nx, ny)) gt.set(nx, ny);
                }
            }
            ds.gt_centerlines.push_back(std::move(gt));
        }
    }
    return ds;
}

// ---- on-disk layout ----

void save_flow_field(const FlowField& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    uint32_t w = f.width, h = f.height;
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(f.d.data()),
              static_cast<std::streamsize>(f.d.size() * sizeof(Vec2)));
    if (!out) throw DataError("short write to " + path.string());
}

FlowField load_flow_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    uint32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    FlowField f;
    f.width = static_cast<int>(w);
    f.height = static_cast<int>(h);
    f.d.resize(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(f.d.data()),
            static_cast<std::streamsize>(f.d.size() * sizeof(Vec2)));
    if (!in) throw DataError("truncated flow field " + path.string());
    return f;
}

void save_phantom(const PhantomDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[64];
    int total = static_cast<int>(ds.sequence.frames.size());
    int contrasted = ds.sequence.contrasted_count();
    for (int i = 0; i < total; ++i) {
        std::snprintf(name, sizeof(name), "frame_%04d.pgm", i);
        save_pgm(ds.sequence.frames[i], dir / name, 65535);
        std::snprintf(name, sizeof(name), "truth_flow_%04d.f64", i);
        save_flow_field(ds.truth_flows[i], dir / name);
    }
    save_mask(ds.reference_mask, dir / "reference_mask.pgm");
    save_mask(ds.reference_centerline, dir / "reference_centerline.pgm");
    for (size_t q = 0; q < ds.gt_centerlines.size(); ++q) {
        std::snprintf(name, sizeof(name), "gt_centerline_%04d.pgm",
                      contrasted + static_cast<int>(q));
        save_mask(ds.gt_centerlines[q], dir / name);
    }
    std::ofstream man(dir / "manifest.txt");
    man << "contrasted_count=" << contrasted << "\n"
        << "frame_count=" << total << "\n"
        << "reference_index=" << ds.sequence.reference_index << "\n"
        << "pixel_spacing_mm=" << ds.sequence.pixel_spacing_mm << "\n"
        << "frame_pattern=frame_%04d.pgm\n";
    if (!man) throw DataError("cannot write manifest in " + dir.string());
}

PhantomConfig phantom_config_from_file(const std::filesystem::path& path) {
    auto kv = parse_kv_file(path);
    PhantomConfig cfg;
    for (const auto& [key, value] : kv) {
        try {
            if (key == "width") cfg.width = std::stoi(value);
            else if (key == "height") cfg.height = std::stoi(value);
            else if (key == "amplitude_px") cfg.amplitude_px = std::stod(value);
            else if (key == "period_frames") cfg.period_frames = std::stod(value);
            else if (key == "gamma") cfg.gamma = std::stod(value);
            else if (key == "phase") cfg.phase = std::stod(value);
            else if (key == "contrasted_frames") cfg.contrasted_frames = std::stoi(value);
            else if (key == "live_frames") cfg.live_frames = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "pixel_spacing_mm") cfg.pixel_spacing_mm = std::stod(value);
            else if (key == "vessel_radius_px") cfg.vessel_radius_px = std::stod(value);
            else if (key == "vessel_darkness") cfg.vessel_darkness = std::stod(value);
            else throw ConfigError("unknown phantom config key: " + key);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for " + key + ": '" + value + "'");
        }
    }
    return cfg;
}

} // namespace mrc
