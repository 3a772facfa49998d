#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mrc/errors.hpp"

namespace mrc {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

// Grayscale frame with intensities normalized to [0,1].
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<float> pixels; // row-major, width*height
    int index = 0;
    bool contrasted = false;

    float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    // Bilinear sample; caller guarantees (x,y) in [0,w-1]x[0,h-1].
    double sample(double x, double y) const;
};

Frame make_frame(int width, int height, float fill = 0.0f);

enum class MaskKind { Mask, Centerline };

struct VesselMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits; // 0/1 per pixel, row-major
    MaskKind kind = MaskKind::Mask;

    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, uint8_t v = 1) { bits[static_cast<size_t>(y) * width + x] = v; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    size_t count() const;
};

VesselMask make_mask(int width, int height, MaskKind kind = MaskKind::Mask);

VesselMask dilate(const VesselMask& m, int radius);
VesselMask erode(const VesselMask& m, int radius);
// 3x3 closing (dilate then erode with radius 1).
VesselMask close3x3(const VesselMask& m);

struct FluoroSequence {
    std::vector<Frame> frames;
    int reference_index = 0;
    double pixel_spacing_mm = 1.0;

    const Frame& reference() const { return frames[reference_index]; }
    int contrasted_count() const;
};

// ---- image I/O ----

// PGM (P5, 8- or 16-bit big-endian) and grayscale PNG; intensities divided
// by the format's max value.
Frame load_gray(const std::filesystem::path& path);

// PGM, intensity clamped to [0,1] and scaled by maxval (255 or 65535).
void save_pgm(const Frame& f, const std::filesystem::path& path, int maxval = 255);
void save_png_gray(const Frame& f, const std::filesystem::path& path);

// Binary mask as 8-bit image (0 / 255).
VesselMask load_mask(const std::filesystem::path& path, MaskKind kind = MaskKind::Mask);
void save_mask(const VesselMask& m, const std::filesystem::path& path);

// Grayscale frame with mask pixels tinted red, as interleaved 8-bit RGB.
std::vector<uint8_t> overlay_rgb(const Frame& frame, const VesselMask& mask);
// Same, written as an RGB PNG.
void write_overlay(const Frame& frame, const VesselMask& mask, const std::filesystem::path& out_path);

// Sequence manifest: key=value file with contrasted_count, reference_index,
// pixel_spacing_mm, frame_glob (printf-style pattern or prefix).
FluoroSequence load_sequence(const std::filesystem::path& dir_path, const std::filesystem::path& manifest_path);

} // namespace mrc
