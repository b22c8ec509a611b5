#include "memda/plot.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "memda/errors.hpp"

namespace memda {

namespace {

void put_u16(std::ofstream& out, std::uint16_t v) {
    char buf[2];
    std::memcpy(buf, &v, 2);
    out.write(buf, 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

void put_i32(std::ofstream& out, std::int32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

}  // namespace

Image::Image(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw ConfigError("image dimensions must be positive");
    rgb.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

void Image::set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void Image::save_bmp(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    const int row_bytes = width * 3;
    const int padding = (4 - row_bytes % 4) % 4;
    const std::uint32_t pixel_bytes = static_cast<std::uint32_t>((row_bytes + padding) * height);
    const std::uint32_t header_bytes = 14 + 40;

    out.write("BM", 2);
    put_u32(out, header_bytes + pixel_bytes);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u32(out, header_bytes);

    put_u32(out, 40);
    put_i32(out, width);
    put_i32(out, height);
    put_u16(out, 1);
    put_u16(out, 24);
    put_u32(out, 0);
    put_u32(out, pixel_bytes);
    put_i32(out, 2835);
    put_i32(out, 2835);
    put_u32(out, 0);
    put_u32(out, 0);

    const char pad[3] = {0, 0, 0};
    for (int y = height - 1; y >= 0; --y) {  // BMP stores rows bottom-up
        for (int x = 0; x < width; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
            const char bgr[3] = {static_cast<char>(rgb[i + 2]), static_cast<char>(rgb[i + 1]),
                                 static_cast<char>(rgb[i])};
            out.write(bgr, 3);
        }
        out.write(pad, padding);
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

void color_ramp(double v, unsigned char& r, unsigned char& g, unsigned char& b) {
    v = std::clamp(v, 0.0, 1.0);
    // dark blue -> teal -> yellow
    if (v < 0.5) {
        const double t = v / 0.5;
        r = static_cast<unsigned char>(20 + 10 * t);
        g = static_cast<unsigned char>(30 + 170 * t);
        b = static_cast<unsigned char>(120 + 40 * t);
    } else {
        const double t = (v - 0.5) / 0.5;
        r = static_cast<unsigned char>(30 + 215 * t);
        g = static_cast<unsigned char>(200 + 30 * t);
        b = static_cast<unsigned char>(160 - 130 * t);
    }
}

void plot_heatmap(const Tensor& matrix, const std::string& path, int cell_w, int cell_h) {
    if (matrix.rank() != 2) throw ShapeError("heatmap needs a rank-2 matrix");
    if (cell_w < 1 || cell_h < 1) throw ConfigError("heatmap cell size must be positive");
    const int rows = matrix.dim(0), cols = matrix.dim(1);
    double lo = matrix[0], hi = matrix[0];
    for (long long i = 0; i < matrix.size(); ++i) {
        lo = std::min(lo, matrix[i]);
        hi = std::max(hi, matrix[i]);
    }
    const double span = hi - lo;

    Image img(cols * cell_w, rows * cell_h);
    for (int rr = 0; rr < rows; ++rr) {
        for (int cc = 0; cc < cols; ++cc) {
            const double v = span > 0.0 ? (matrix.at(rr, cc) - lo) / span : 0.5;
            unsigned char r, g, b;
            color_ramp(v, r, g, b);
            for (int dy = 0; dy < cell_h; ++dy)
                for (int dx = 0; dx < cell_w; ++dx)
                    img.set(cc * cell_w + dx, rr * cell_h + dy, r, g, b);
        }
    }
    img.save_bmp(path);
}

}  // namespace memda
