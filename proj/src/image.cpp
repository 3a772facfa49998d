#include "mrc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

#include "mrc/config.hpp"

namespace mrc {

double Frame::sample(double x, double y) const {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    x0 = std::clamp(x0, 0, width - 2);
    y0 = std::clamp(y0, 0, height - 2);
    double fx = x - x0;
    double fy = y - y0;
    double v00 = at(x0, y0), v10 = at(x0 + 1, y0);
    double v01 = at(x0, y0 + 1), v11 = at(x0 + 1, y0 + 1);
    return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
}

Frame make_frame(int width, int height, float fill) {
    Frame f;
    f.width = width;
    f.height = height;
    f.pixels.assign(static_cast<size_t>(width) * height, fill);
    return f;
}

size_t VesselMask::count() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b != 0;
    return n;
}

VesselMask make_mask(int width, int height, MaskKind kind) {
    VesselMask m;
    m.width = width;
    m.height = height;
    m.kind = kind;
    m.bits.assign(static_cast<size_t>(width) * height, 0);
    return m;
}

static VesselMask morph(const VesselMask& m, int radius, bool dilation) {
    VesselMask out = make_mask(m.width, m.height, m.kind);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            uint8_t v = dilation ? 0 : 1;
            for (int dy = -radius; dy <= radius && v == (dilation ? 0 : 1); ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    uint8_t nb = m.in_bounds(nx, ny) ? m.at(nx, ny) : 0;
                    if (dilation && nb) { v = 1; break; }
                    if (!dilation && !nb) { v = 0; break; }
                }
            }
            out.set(x, y, v);
        }
    }
    return out;
}

VesselMask dilate(const VesselMask& m, int radius) { return radius <= 0 ? m : morph(m, radius, true); }
VesselMask erode(const VesselMask& m, int radius) { return radius <= 0 ? m : morph(m, radius, false); }
VesselMask close3x3(const VesselMask& m) { return erode(dilate(m, 1), 1); }

int FluoroSequence::contrasted_count() const {
    int n = 0;
    for (const auto& f : frames) n += f.contrasted;
    return n;
}

// ---- PGM ----

static void skip_pgm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
}

static Frame load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw DataError(path.string() + ": not a P5 PGM");
    int w, h, maxval;
    skip_pgm_whitespace(in);
    in >> w;
    skip_pgm_whitespace(in);
    in >> h;
    skip_pgm_whitespace(in);
    in >> maxval;
    in.get(); // single whitespace before raster
    if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw DataError(path.string() + ": bad PGM header");
    Frame f = make_frame(w, h);
    size_t n = static_cast<size_t>(w) * h;
    if (maxval < 256) {
        std::vector<uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!in) throw DataError(path.string() + ": truncated PGM raster");
        for (size_t i = 0; i < n; ++i) f.pixels[i] = static_cast<float>(buf[i] / double(maxval));
    } else {
        std::vector<uint8_t> buf(2 * n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
        if (!in) throw DataError(path.string() + ": truncated PGM raster");
        for (size_t i = 0; i < n; ++i) {
            unsigned v = (unsigned(buf[2 * i]) << 8) | buf[2 * i + 1]; // big-endian per P5
            f.pixels[i] = static_cast<float>(v / double(maxval));
        }
    }
    return f;
}

void save_pgm(const Frame& f, const std::filesystem::path& path, int maxval) {
    if (maxval != 255 && maxval != 65535) throw DataError("save_pgm: maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << f.width << " " << f.height << "\n" << maxval << "\n";
    std::vector<uint8_t> buf;
    buf.reserve(f.pixels.size() * (maxval > 255 ? 2 : 1));
    for (float p : f.pixels) {
        double v = std::clamp(static_cast<double>(p), 0.0, 1.0);
        long q = std::lround(v * maxval);
        if (maxval > 255) buf.push_back(static_cast<uint8_t>(q >> 8));
        buf.push_back(static_cast<uint8_t>(q & 0xff));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("short write to " + path.string());
}

// ---- PNG ----

namespace {

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) fclose(fp);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) fclose(fp);
    }
};

} // namespace

static Frame load_png_gray(const std::filesystem::path& path) {
    PngReader r;
    r.fp = fopen(path.c_str(), "rb");
    if (!r.fp) throw DataError("cannot open " + path.string());
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (setjmp(png_jmpbuf(r.png))) throw DataError(path.string() + ": PNG decode failed");
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);
    png_uint_32 w = png_get_image_width(r.png, r.info);
    png_uint_32 h = png_get_image_height(r.png, r.info);
    int depth = png_get_bit_depth(r.png, r.info);
    int color = png_get_color_type(r.png, r.info);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(r.png, 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    png_read_update_info(r.png, r.info);
    depth = png_get_bit_depth(r.png, r.info);
    double maxval = depth == 16 ? 65535.0 : 255.0;
    Frame f = make_frame(static_cast<int>(w), static_cast<int>(h));
    std::vector<uint8_t> row(png_get_rowbytes(r.png, r.info));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(r.png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            unsigned v = depth == 16 ? ((unsigned(row[2 * x]) << 8) | row[2 * x + 1]) : row[x];
            f.pixels[static_cast<size_t>(y) * w + x] = static_cast<float>(v / maxval);
        }
    }
    png_read_end(r.png, nullptr);
    return f;
}

static void write_png_rows(const std::filesystem::path& path, int width, int height,
                           int color_type, const std::vector<uint8_t>& data, int channels) {
    PngWriter wr;
    wr.fp = fopen(path.c_str(), "wb");
    if (!wr.fp) throw DataError("cannot write " + path.string());
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    wr.info = png_create_info_struct(wr.png);
    if (setjmp(png_jmpbuf(wr.png))) throw DataError(path.string() + ": PNG encode failed");
    png_init_io(wr.png, wr.fp);
    png_set_IHDR(wr.png, wr.info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    for (int y = 0; y < height; ++y)
        png_write_row(wr.png, const_cast<png_bytep>(data.data() + static_cast<size_t>(y) * width * channels));
    png_write_end(wr.png, nullptr);
}

void save_png_gray(const Frame& f, const std::filesystem::path& path) {
    std::vector<uint8_t> buf(f.pixels.size());
    for (size_t i = 0; i < f.pixels.size(); ++i) {
        double v = std::clamp(static_cast<double>(f.pixels[i]), 0.0, 1.0);
        buf[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    write_png_rows(path, f.width, f.height, PNG_COLOR_TYPE_GRAY, buf, 1);
}

Frame load_gray(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") return load_pgm(path);
    if (ext == ".png") return load_png_gray(path);
    throw DataError("unsupported image format: " + path.string());
}

VesselMask load_mask(const std::filesystem::path& path, MaskKind kind) {
    Frame f = load_gray(path);
    VesselMask m = make_mask(f.width, f.height, kind);
    for (size_t i = 0; i < f.pixels.size(); ++i) m.bits[i] = f.pixels[i] > 0.5f ? 1 : 0;
    return m;
}

void save_mask(const VesselMask& m, const std::filesystem::path& path) {
    Frame f = make_frame(m.width, m.height);
    for (size_t i = 0; i < m.bits.size(); ++i) f.pixels[i] = m.bits[i] ? 1.0f : 0.0f;
    if (path.extension() == ".png")
        save_png_gray(f, path);
    else
        save_pgm(f, path);
}

std::vector<uint8_t> overlay_rgb(const Frame& frame, const VesselMask& mask) {
    if (frame.width != mask.width || frame.height != mask.height)
        throw DataError("overlay: frame/mask dimension mismatch");
    std::vector<uint8_t> rgb(static_cast<size_t>(frame.width) * frame.height * 3);
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            size_t i = static_cast<size_t>(y) * frame.width + x;
            double v = std::clamp(static_cast<double>(frame.pixels[i]), 0.0, 1.0);
            uint8_t g = static_cast<uint8_t>(std::lround(v * 255.0));
            if (mask.bits[i]) {
                rgb[3 * i] = 220;
                rgb[3 * i + 1] = static_cast<uint8_t>(g / 4);
                rgb[3 * i + 2] = static_cast<uint8_t>(g / 4);
            } else {
                rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = g;
            }
        }
    }
    return rgb;
}

void write_overlay(const Frame& frame, const VesselMask& mask, const std::filesystem::path& out_path) {
    write_png_rows(out_path, frame.width, frame.height, PNG_COLOR_TYPE_RGB,
                   overlay_rgb(frame, mask), 3);
}

FluoroSequence load_sequence(const std::filesystem::path& dir_path, const std::filesystem::path& manifest_path) {
    auto kv = parse_kv_file(manifest_path);
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("manifest missing key " + key);
        return it->second;
    };
    int contrasted = std::stoi(need("contrasted_count"));
    int total = std::stoi(need("frame_count"));
    int ref = std::stoi(need("reference_index"));
    double spacing = std::stod(need("pixel_spacing_mm"));
    std::string pattern = need("frame_pattern");
    if (contrasted <= 0 || total < contrasted)
        throw DataError("manifest: frame_count must be >= contrasted_count > 0");
    if (ref < 0 || ref >= contrasted)
        throw DataError("manifest: reference_index must address a contrasted frame");

    FluoroSequence seq;
    seq.reference_index = ref;
    seq.pixel_spacing_mm = spacing;
    char name[512];
    for (int i = 0; i < total; ++i) {
        std::snprintf(name, sizeof(name), pattern.c_str(), i);
        auto p = dir_path / name;
        if (!std::filesystem::exists(p)) throw DataError("missing frame file " + p.string());
        Frame f = load_gray(p);
        f.index = i;
        f.contrasted = i < contrasted;
        if (!seq.frames.empty() &&
            (f.width != seq.frames[0].width || f.height != seq.frames[0].height))
            throw DataError("frame dimension mismatch at " + p.string());
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

} // namespace mrc
