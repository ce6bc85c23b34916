#pragma once

#include <stdexcept>
#include <vector>

#include "fuzzyseg/fuzzify.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct TileGrid {
    int patch = 640;
    int stride = 640;
    Padding pad_policy = Padding::Reflect;

    void validate() const {
        if (patch <= 0) throw std::invalid_argument("TileGrid: patch must be > 0");
        if (stride <= 0 || stride > patch) throw std::invalid_argument("TileGrid: need 0 < stride <= patch");
    }
};

struct Patch3D {
    Grid3D data;
    int row_offset = 0;  // in the padded frame
    int col_offset = 0;
};

namespace detail {

// Smallest size >= max(dim, patch) with (size - patch) a multiple of stride.
inline int padded_extent(int dim, int patch, int stride) {
    if (dim <= patch) return patch;
    int over = (dim - patch) % stride;
    return over == 0 ? dim : dim + (stride - over);
}

inline double padded_sample(const Grid3D& g, int ch, int r, int c, Padding policy) {
    if (r < g.height && c < g.width) return g.at(ch, r, c);
    if (policy == Padding::Zero) return 0.0;
    return g.at(ch, reflect_index(r, g.height), reflect_index(c, g.width));
}

}  // namespace detail

inline int patch_count_1d(int dim, int patch, int stride) {
    int padded = detail::padded_extent(dim, patch, stride);
    return (padded - patch) / stride + 1;
}

inline std::vector<Patch3D> extract_patches(const Grid3D& raster, const TileGrid& grid) {
    grid.validate();
    if (raster.size() == 0) throw std::invalid_argument("extract_patches: empty raster");
    int nr = patch_count_1d(raster.height, grid.patch, grid.stride);
    int nc = patch_count_1d(raster.width, grid.patch, grid.stride);
    std::vector<Patch3D> patches;
    patches.reserve(static_cast<size_t>(nr) * nc);
    for (int pr = 0; pr < nr; ++pr) {
        for (int pc = 0; pc < nc; ++pc) {
            Patch3D p;
            p.row_offset = pr * grid.stride;
            p.col_offset = pc * grid.stride;
            p.data = Grid3D(raster.channels, grid.patch, grid.patch);
            for (int ch = 0; ch < raster.channels; ++ch)
                for (int r = 0; r < grid.patch; ++r)
                    for (int c = 0; c < grid.patch; ++c)
                        p.data.at(ch, r, c) =
                            detail::padded_sample(raster, ch, p.row_offset + r, p.col_offset + c, grid.pad_policy);
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

// Inverse of extract_patches: overlaps averaged with equal weights, result
// cropped to (out_height, out_width).
inline Grid3D stitch(const std::vector<Patch3D>& patches, int out_height, int out_width, int stride, int patch) {
    if (patches.empty()) throw std::invalid_argument("stitch: no patches");
    int channels = patches.front().data.channels;
    for (const auto& p : patches) {
        if (p.data.channels != channels || p.data.height != patch || p.data.width != patch)
            throw std::invalid_argument("stitch: inconsistent patch shapes");
        if (p.row_offset % stride != 0 || p.col_offset % stride != 0 || p.row_offset < 0 || p.col_offset < 0)
            throw std::invalid_argument("stitch: offset off the stride lattice");
    }
    int full_h = 0, full_w = 0;
    for (const auto& p : patches) {
        full_h = std::max(full_h, p.row_offset + patch);
        full_w = std::max(full_w, p.col_offset + patch);
    }
    Grid3D sum(channels, full_h, full_w, 0.0);
    Grid2D weight(full_h, full_w, 0.0);
    for (const auto& p : patches) {
        for (int ch = 0; ch < channels; ++ch)
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c)
                    sum.at(ch, p.row_offset + r, p.col_offset + c) += p.data.at(ch, r, c);
        for (int r = 0; r < patch; ++r)
            for (int c = 0; c < patch; ++c) weight.at(p.row_offset + r, p.col_offset + c) += 1.0;
    }
    Grid3D out(channels, out_height, out_width, 0.0);
    for (int ch = 0; ch < channels; ++ch)
        for (int r = 0; r < out_height; ++r)
            for (int c = 0; c < out_width; ++c) {
                double w = (r < full_h && c < full_w) ? weight.at(r, c) : 0.0;
                if (w == 1.0)
                    out.at(ch, r, c) = sum.at(ch, r, c);  // bit-exact in the no-overlap case
                else if (w > 0.0)
                    out.at(ch, r, c) = sum.at(ch, r, c) / w;
            }
    return out;
}

}  // namespace fuzzyseg
