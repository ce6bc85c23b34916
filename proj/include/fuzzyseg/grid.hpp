#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fuzzyseg {

// Row-major 2D grid of doubles.
struct Grid2D {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Grid2D() = default;
    Grid2D(int h, int w, double fill = 0.0) : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("Grid2D: non-positive dimensions");
    }

    double& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return values.size(); }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Channel-planar 3D grid (channels x height x width).
struct Grid3D {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Grid3D() = default;
    Grid3D(int ch, int h, int w, double fill = 0.0)
        : channels(ch), height(h), width(w), values(static_cast<size_t>(ch) * h * w, fill) {
        if (ch <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("Grid3D: non-positive dimensions");
    }

    double& at(int ch, int r, int c) {
        return values[(static_cast<size_t>(ch) * height + r) * width + c];
    }
    double at(int ch, int r, int c) const {
        return values[(static_cast<size_t>(ch) * height + r) * width + c];
    }
    size_t size() const { return values.size(); }

    Grid2D channel(int ch) const {
        Grid2D out(height, width);
        const double* src = values.data() + static_cast<size_t>(ch) * height * width;
        std::copy(src, src + static_cast<size_t>(height) * width, out.values.begin());
        return out;
    }
    void set_channel(int ch, const Grid2D& g) {
        if (g.height != height || g.width != width) throw std::invalid_argument("set_channel: shape mismatch");
        std::copy(g.values.begin(), g.values.end(),
                  values.begin() + static_cast<size_t>(ch) * height * width);
    }
};

// Hard class raster, values in {0, ..., C-1}.
struct MaskGrid {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> values;

    MaskGrid() = default;
    MaskGrid(int h, int w, uint8_t fill = 0) : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("MaskGrid: non-positive dimensions");
    }

    uint8_t& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    uint8_t at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return values.size(); }

    Grid2D to_grid() const {
        Grid2D g(height, width);
        for (size_t i = 0; i < values.size(); ++i) g.values[i] = static_cast<double>(values[i]);
        return g;
    }
};

// Gaussian-softened mask, values in [0,1].
struct FuzzyMask {
    Grid2D grid;

    int height() const { return grid.height; }
    int width() const { return grid.width; }
};

}  // namespace fuzzyseg
