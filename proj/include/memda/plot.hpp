#pragma once

#include <string>
#include <vector>

#include "memda/tensor.hpp"

namespace memda {

/// 24-bit RGB raster with (0,0) at the top left, written as a BMP file.
struct Image {
    int width = 0, height = 0;
    std::vector<unsigned char> rgb;

    Image(int w, int h);
    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b);
    void save_bmp(const std::string& path) const;
};

/// Blue-to-yellow ramp for v in [0, 1] (clamped).
void color_ramp(double v, unsigned char& r, unsigned char& g, unsigned char& b);

/// Heatmap of a (rows x cols) matrix: one cell_w x cell_h block per value,
/// color scaled to the matrix min/max. Rows run top to bottom.
void plot_heatmap(const Tensor& matrix, const std::string& path, int cell_w = 3, int cell_h = 24);

}  // namespace memda
