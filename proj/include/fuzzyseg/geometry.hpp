#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

// World-to-raster mapping. origin is the top-left corner of the top-left
// pixel; rows increase as world y decreases (north-up).
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double resolution = 1.0;  // meters per pixel, square pixels

    bool valid() const {
        return std::isfinite(origin_x) && std::isfinite(origin_y) && std::isfinite(resolution) &&
               resolution > 0.0;
    }
};

struct PlantAnnotation {
    std::string id;
    int species_id = 0;
    double center_x = 0.0;
    double center_y = 0.0;
    double diameter = 0.0;
    std::vector<std::pair<double, double>> outline;  // optional, >= 3 vertices when present

    bool valid() const {
        if (species_id < 0 || diameter < 0.0) return false;
        if (!std::isfinite(center_x) || !std::isfinite(center_y) || !std::isfinite(diameter)) return false;
        if (!outline.empty() && outline.size() < 3) return false;
        return true;
    }
};

namespace detail {

// floor with a snap to the nearest integer when the quotient carries only
// representation error, so cell boundaries land where exact arithmetic puts them
inline int snapped_floor(double q) {
    double nearest = std::round(q);
    if (std::abs(q - nearest) < 1e-9) return static_cast<int>(nearest);
    return static_cast<int>(std::floor(q));
}

}  // namespace detail

inline std::pair<int, int> world_to_pixel(const GeoTransform& gt, double x, double y) {
    if (!gt.valid()) throw std::invalid_argument("world_to_pixel: invalid GeoTransform");
    if (!std::isfinite(x) || !std::isfinite(y)) throw std::invalid_argument("world_to_pixel: non-finite point");
    int col = detail::snapped_floor((x - gt.origin_x) / gt.resolution);
    int row = detail::snapped_floor((gt.origin_y - y) / gt.resolution);
    return {row, col};
}

// World coordinates of the center of pixel (row, col).
inline std::pair<double, double> pixel_center(const GeoTransform& gt, int row, int col) {
    double x = gt.origin_x + (col + 0.5) * gt.resolution;
    double y = gt.origin_y - (row + 0.5) * gt.resolution;
    return {x, y};
}

// Even-odd rule point-in-polygon.
inline bool point_in_polygon(const std::vector<std::pair<double, double>>& poly, double x, double y) {
    bool inside = false;
    size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        double xi = poly[i].first, yi = poly[i].second;
        double xj = poly[j].first, yj = poly[j].second;
        if ((yi > y) != (yj > y)) {
            double x_cross = xj + (y - yj) / (yi - yj) * (xi - xj);
            if (x < x_cross) inside = !inside;
        }
    }
    return inside;
}

inline bool annotation_covers(const PlantAnnotation& a, double x, double y) {
    double r = a.diameter / 2.0;
    double dx = x - a.center_x, dy = y - a.center_y;
    if (dx * dx + dy * dy <= r * r) return true;
    if (!a.outline.empty() && point_in_polygon(a.outline, x, y)) return true;
    return false;
}

// Binary rasterization: a pixel is foreground iff its center lies within any
// annotation disc or polygon. Overlaps union; species collapse to class 1.
inline MaskGrid rasterize(const std::vector<PlantAnnotation>& annotations, const GeoTransform& gt,
                          int height, int width) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("rasterize: non-positive raster size");
    if (!gt.valid()) throw std::invalid_argument("rasterize: invalid GeoTransform");
    for (const auto& a : annotations)
        if (!a.valid()) throw std::invalid_argument("rasterize: invalid annotation '" + a.id + "'");

    MaskGrid mask(height, width, 0);
    for (const auto& a : annotations) {
        // Bounding box of the annotation in pixel space, clipped to the raster.
        double r = a.diameter / 2.0;
        double min_x = a.center_x - r, max_x = a.center_x + r;
        double min_y = a.center_y - r, max_y = a.center_y + r;
        for (const auto& [vx, vy] : a.outline) {
            min_x = std::min(min_x, vx);
            max_x = std::max(max_x, vx);
            min_y = std::min(min_y, vy);
            max_y = std::max(max_y, vy);
        }
        auto [r0, c0] = world_to_pixel(gt, min_x, max_y);
        auto [r1, c1] = world_to_pixel(gt, max_x, min_y);
        r0 = std::max(r0 - 1, 0);
        c0 = std::max(c0 - 1, 0);
        r1 = std::min(r1 + 1, height - 1);
        c1 = std::min(c1 + 1, width - 1);
        for (int row = r0; row <= r1; ++row) {
            for (int col = c0; col <= c1; ++col) {
                auto [px, py] = pixel_center(gt, row, col);
                if (annotation_covers(a, px, py)) mask.at(row, col) = 1;
            }
        }
    }
    return mask;
}

// --- annotation CSV -------------------------------------------------------
// Format: id,species_id,center_x_m,center_y_m,diameter_m,polygon
// polygon empty or "x1 y1;x2 y2;..."

inline std::vector<PlantAnnotation> parse_annotation_csv(std::istream& in) {
    std::vector<PlantAnnotation> out;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("annotation CSV: empty file (header required)");
    // header checked loosely: must start with "id,"
    if (line.rfind("id,", 0) != 0) throw std::runtime_error("annotation CSV: missing header row");
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() == 5) fields.push_back("");  // trailing empty polygon
        if (fields.size() != 6)
            throw std::runtime_error("annotation CSV: line " + std::to_string(lineno) + ": expected 6 fields");
        PlantAnnotation a;
        a.id = fields[0];
        a.species_id = std::stoi(fields[1]);
        a.center_x = std::stod(fields[2]);
        a.center_y = std::stod(fields[3]);
        a.diameter = std::stod(fields[4]);
        if (!fields[5].empty()) {
            std::stringstream ps(fields[5]);
            std::string vert;
            while (std::getline(ps, vert, ';')) {
                std::stringstream vs(vert);
                double x, y;
                if (!(vs >> x >> y))
                    throw std::runtime_error("annotation CSV: line " + std::to_string(lineno) + ": bad polygon vertex");
                a.outline.emplace_back(x, y);
            }
            if (a.outline.size() < 3)
                throw std::runtime_error("annotation CSV: line " + std::to_string(lineno) + ": polygon needs >= 3 vertices");
        }
        if (!a.valid())
            throw std::runtime_error("annotation CSV: line " + std::to_string(lineno) + ": invalid annotation");
        out.push_back(std::move(a));
    }
    return out;
}

inline std::vector<PlantAnnotation> load_annotation_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotation CSV: " + path);
    return parse_annotation_csv(in);
}

inline void write_annotation_csv(std::ostream& out, const std::vector<PlantAnnotation>& annotations) {
    out << "id,species_id,center_x_m,center_y_m,diameter_m,polygon\n";
    out.precision(17);
    for (const auto& a : annotations) {
        out << a.id << ',' << a.species_id << ',' << a.center_x << ',' << a.center_y << ',' << a.diameter << ',';
        for (size_t i = 0; i < a.outline.size(); ++i) {
            if (i) out << ';';
            out << a.outline[i].first << ' ' << a.outline[i].second;
        }
        out << '\n';
    }
}

inline void save_annotation_csv(const std::string& path, const std::vector<PlantAnnotation>& annotations) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write annotation CSV: " + path);
    write_annotation_csv(out, annotations);
}

}  // namespace fuzzyseg
