#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzyseg/geometry.hpp"
#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

struct SceneSpec {
    int height = 64;
    int width = 64;
    int n_plants = 5;
    double radius_min = 3.0;  // pixels
    double radius_max = 8.0;
    // color model: mean RGB in [0,1] plus per-pixel noise amplitude
    double bg_level = 0.35;
    double fg_level = 0.65;
    double color_noise = 0.08;
    // annotation noise
    double position_jitter = 0.0;  // sigma, pixels, per axis
    double radius_error = 0.0;     // radius multiplied by (1 + U(-e, e))
    double dropout_prob = 0.0;
    double spurious_prob = 0.0;
    uint64_t seed = 0;

    void validate() const {
        if (height <= 0 || width <= 0 || n_plants < 0) throw std::invalid_argument("SceneSpec: invalid size");
        if (!(radius_min > 0.0) || radius_max < radius_min) throw std::invalid_argument("SceneSpec: invalid radius range");
        if (position_jitter < 0.0 || radius_error < 0.0) throw std::invalid_argument("SceneSpec: negative noise");
        if (dropout_prob < 0.0 || dropout_prob > 1.0 || spurious_prob < 0.0 || spurious_prob > 1.0)
            throw std::invalid_argument("SceneSpec: probability out of [0,1]");
    }

    // North-up identity raster frame: world units are pixels.
    GeoTransform geo() const { return GeoTransform{0.0, static_cast<double>(height), 1.0}; }
};

struct Scene {
    Grid3D image;  // 3 x H x W, values in [0,1]
    std::vector<PlantAnnotation> truth;
    std::vector<PlantAnnotation> noisy;
};

// Textured discs on a textured background. The rendered foreground support
// equals rasterize(truth) exactly (pixel-center-in-disc rule in the same
// world frame).
inline Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Scene scene;
    GeoTransform gt = spec.geo();

    // place discs fully inside the raster
    double rad_hi = std::min(spec.radius_max, std::min(spec.height, spec.width) / 2.0);
    if (rad_hi < spec.radius_min) throw std::runtime_error("generate_scene: radius range does not fit the raster");
    std::uniform_real_distribution<double> rad_dist(spec.radius_min, rad_hi);
    constexpr int kRetryBudget = 1000;
    for (int i = 0; i < spec.n_plants; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kRetryBudget && !placed; ++attempt) {
            double r = rad_dist(rng);
            double cx = unit(rng) * spec.width;
            double cy = unit(rng) * spec.height;
            if (cx - r < 0.0 || cx + r > spec.width || cy - r < 0.0 || cy + r > spec.height) continue;
            PlantAnnotation a;
            a.id = "plant-" + std::to_string(i);
            a.species_id = 1;
            a.center_x = cx;
            a.center_y = cy;
            a.diameter = 2.0 * r;
            scene.truth.push_back(std::move(a));
            placed = true;
        }
        if (!placed) throw std::runtime_error("generate_scene: could not place disc within retry budget");
    }

    // render: pixel is plant iff its center falls in some disc
    scene.image = Grid3D(3, spec.height, spec.width);
    for (int row = 0; row < spec.height; ++row) {
        for (int col = 0; col < spec.width; ++col) {
            auto [px, py] = pixel_center(gt, row, col);
            double shade = 0.0;
            bool fg = false;
            for (const auto& a : scene.truth) {
                double dx = px - a.center_x, dy = py - a.center_y;
                double r = a.diameter / 2.0;
                double d2 = dx * dx + dy * dy;
                if (d2 <= r * r) {
                    fg = true;
                    shade = std::max(shade, 1.0 - std::sqrt(d2) / r);  // radial falloff toward the rim
                }
            }
            double base = fg ? spec.fg_level + 0.2 * shade : spec.bg_level;
            for (int ch = 0; ch < 3; ++ch) {
                double tint = fg ? (ch == 1 ? 0.12 : -0.06) : (ch == 0 ? 0.05 : 0.0);
                double noise = (unit(rng) - 0.5) * 2.0 * spec.color_noise;
                scene.image.at(ch, row, col) = std::clamp(base + tint + noise, 0.0, 1.0);
            }
        }
    }

    // degrade annotations
    std::normal_distribution<double> jitter(0.0, spec.position_jitter > 0.0 ? spec.position_jitter : 1.0);
    std::uniform_real_distribution<double> rad_err(-spec.radius_error, spec.radius_error);
    for (const auto& a : scene.truth) {
        if (spec.dropout_prob > 0.0 && unit(rng) < spec.dropout_prob) continue;
        PlantAnnotation n = a;
        if (spec.position_jitter > 0.0) {
            n.center_x += jitter(rng);
            n.center_y += jitter(rng);
        }
        if (spec.radius_error > 0.0) n.diameter = std::max(0.0, n.diameter * (1.0 + rad_err(rng)));
        scene.noisy.push_back(std::move(n));
    }
    if (spec.spurious_prob > 0.0) {
        for (int i = 0; i < spec.n_plants; ++i) {
            if (unit(rng) >= spec.spurious_prob) continue;
            PlantAnnotation s;
            s.id = "spurious-" + std::to_string(i);
            s.species_id = 1;
            double r = rad_dist(rng);
            s.center_x = unit(rng) * spec.width;
            s.center_y = unit(rng) * spec.height;
            s.diameter = 2.0 * r;
            scene.noisy.push_back(std::move(s));
        }
    }
    return scene;
}

}  // namespace fuzzyseg
