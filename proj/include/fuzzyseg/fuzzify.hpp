#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fuzzyseg/grid.hpp"
#include "fuzzyseg/parallel.hpp"

namespace fuzzyseg {

enum class KernelVariant {
    SigmaSq,  // exp(-(p^2+q^2)/sigma^2), normalizer 1/(2*pi*sigma^2)
    Standard,  // exp(-(p^2+q^2)/(2*sigma^2)), normalizer 1/(2*pi*sigma^2)
};

enum class KernelNorm {
    Analytic,  // keep the closed-form normalizer as-is
    SumToOne,  // rescale entries to sum exactly to 1
};

enum class Padding { Zero, Reflect };

struct KernelSpec {
    double sigma_px = 2.0;
    double truncation_factor = 3.0;
    KernelVariant variant = KernelVariant::Standard;
    KernelNorm normalization = KernelNorm::SumToOne;

    int half_width() const { return std::max(1, static_cast<int>(std::ceil(truncation_factor * sigma_px))); }

    void validate() const {
        if (!(sigma_px > 0.0)) throw std::invalid_argument("KernelSpec: sigma_px must be > 0");
        if (!(truncation_factor >= 1.0)) throw std::invalid_argument("KernelSpec: truncation_factor must be >= 1");
    }
};

// 1D kernel whose self outer product equals the 2D kernel.
inline std::vector<double> gaussian_kernel_1d(const KernelSpec& spec) {
    spec.validate();
    int hw = spec.half_width();
    std::vector<double> k(2 * hw + 1);
    double sigma2 = spec.sigma_px * spec.sigma_px;
    // exponent denominator: sigma^2 for the sigma-sq variant, 2*sigma^2 standard
    double denom = (spec.variant == KernelVariant::SigmaSq) ? sigma2 : 2.0 * sigma2;
    double norm1d = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma2);
    for (int p = -hw; p <= hw; ++p) k[p + hw] = norm1d * std::exp(-static_cast<double>(p) * p / denom);
    if (spec.normalization == KernelNorm::SumToOne) {
        double s = 0.0;
        for (double v : k) s += v;
        for (double& v : k) v /= s;
    }
    return k;
}

inline Grid2D gaussian_kernel_2d(const KernelSpec& spec) {
    auto k1 = gaussian_kernel_1d(spec);
    int n = static_cast<int>(k1.size());
    Grid2D k2(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) k2.at(r, c) = k1[r] * k1[c];
    return k2;
}

namespace detail {

// Fold an out-of-range index back into [0, n) by repeated mirroring with
// edge repetition (-1 -> 0, -2 -> 1, n -> n-1, ...).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return (i < n) ? i : period - 1 - i;
}

// Small rasters are not worth spawning workers for.
inline bool worth_threads(const Grid2D& g) { return g.size() >= (1u << 16); }

inline void convolve_rows(const Grid2D& in, const std::vector<double>& k, Padding padding, Grid2D& out) {
    int hw = (static_cast<int>(k.size()) - 1) / 2;
    maybe_parallel_for(worth_threads(in), in.height, [&](int r) {
        for (int c = 0; c < in.width; ++c) {
            double acc = 0.0;
            for (int o = -hw; o <= hw; ++o) {
                int cc = c + o;
                if (cc < 0 || cc >= in.width) {
                    if (padding == Padding::Zero) continue;
                    cc = reflect_index(cc, in.width);
                }
                acc += k[o + hw] * in.at(r, cc);
            }
            out.at(r, c) = acc;
        }
    });
}

inline void convolve_cols(const Grid2D& in, const std::vector<double>& k, Padding padding, Grid2D& out) {
    int hw = (static_cast<int>(k.size()) - 1) / 2;
    maybe_parallel_for(worth_threads(in), in.width, [&](int c) {
        for (int r = 0; r < in.height; ++r) {
            double acc = 0.0;
            for (int o = -hw; o <= hw; ++o) {
                int rr = r + o;
                if (rr < 0 || rr >= in.height) {
                    if (padding == Padding::Zero) continue;
                    rr = reflect_index(rr, in.height);
                }
                acc += k[o + hw] * in.at(rr, c);
            }
            out.at(r, c) = acc;
        }
    });
}

}  // namespace detail

// Two-pass separable convolution, same output shape as the input.
inline Grid2D convolve_separable(const Grid2D& raster, const std::vector<double>& k1d, Padding padding) {
    if (k1d.empty() || k1d.size() % 2 == 0) throw std::invalid_argument("convolve_separable: kernel length must be odd");
    if (!raster.all_finite()) throw std::invalid_argument("convolve_separable: non-finite raster values");
    Grid2D tmp(raster.height, raster.width);
    Grid2D out(raster.height, raster.width);
    detail::convolve_rows(raster, k1d, padding, tmp);
    detail::convolve_cols(tmp, k1d, padding, out);
    return out;
}

// Gaussian-soften a binary mask into [0,1] foreground confidences.
inline FuzzyMask fuzzify_mask(const MaskGrid& mask, const KernelSpec& spec, Padding padding = Padding::Reflect) {
    for (uint8_t v : mask.values)
        if (v > 1) throw std::invalid_argument("fuzzify_mask: mask must be binary");
    auto k1 = gaussian_kernel_1d(spec);
    FuzzyMask out;
    out.grid = convolve_separable(mask.to_grid(), k1, padding);
    for (double& v : out.grid.values) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace fuzzyseg
