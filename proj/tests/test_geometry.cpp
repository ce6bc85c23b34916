#include <doctest.h>

#include <random>
#include <sstream>

#include "fuzzyseg/geometry.hpp"

using namespace fuzzyseg;

namespace {

// Independent per-pixel oracle: test every pixel center directly.
MaskGrid brute_force_rasterize(const std::vector<PlantAnnotation>& anns, const GeoTransform& gt, int h, int w) {
    MaskGrid mask(h, w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double x = gt.origin_x + (c + 0.5) * gt.resolution;
            double y = gt.origin_y - (r + 0.5) * gt.resolution;
            for (const auto& a : anns) {
                double dx = x - a.center_x, dy = y - a.center_y;
                bool in = dx * dx + dy * dy <= (a.diameter / 2) * (a.diameter / 2);
                if (!in && a.outline.size() >= 3) in = point_in_polygon(a.outline, x, y);
                if (in) {
                    mask.at(r, c) = 1;
                    break;
                }
            }
        }
    return mask;
}

PlantAnnotation disc(double cx, double cy, double d) {
    PlantAnnotation a;
    a.id = "d";
    a.species_id = 1;
    a.center_x = cx;
    a.center_y = cy;
    a.diameter = d;
    return a;
}

}  // namespace

TEST_CASE("world_to_pixel follows the north-up floor convention") {
    CHECK(world_to_pixel({0, 10, 1}, 3.0, 7.0) == std::pair{3, 3});
    CHECK(world_to_pixel({0, 0, 1}, 0.0, 0.0) == std::pair{0, 0});
    CHECK(world_to_pixel({10, 20, 0.01}, 10.05, 19.98) == std::pair{2, 5});
    CHECK_THROWS(world_to_pixel({0, 0, 0.0}, 1.0, 1.0));
    CHECK_THROWS(world_to_pixel({0, 0, 1.0}, std::nan(""), 1.0));
}

TEST_CASE("rasterize basics") {
    GeoTransform gt{0, 10, 1};
    SUBCASE("empty annotation list gives an all-zero mask") {
        MaskGrid m = rasterize({}, gt, 10, 10);
        for (auto v : m.values) CHECK(v == 0);
    }
    SUBCASE("a disc larger than the diagonal covers everything") {
        MaskGrid m = rasterize({disc(5, 5, 100)}, gt, 10, 10);
        for (auto v : m.values) CHECK(v == 1);
    }
    SUBCASE("disc at (5.5, 4.5) diameter 2 matches the brute-force oracle") {
        auto anns = std::vector{disc(5.5, 4.5, 2)};
        MaskGrid m = rasterize(anns, gt, 10, 10);
        MaskGrid oracle = brute_force_rasterize(anns, gt, 10, 10);
        CHECK(m.values == oracle.values);
        int count = 0;
        for (auto v : m.values) count += v;
        CHECK(count > 0);
    }
    SUBCASE("annotation fully outside the raster contributes nothing") {
        MaskGrid m = rasterize({disc(100, 100, 4)}, gt, 10, 10);
        for (auto v : m.values) CHECK(v == 0);
    }
    SUBCASE("outline with fewer than 3 vertices is rejected") {
        PlantAnnotation a = disc(5, 5, 2);
        a.outline = {{0, 0}, {1, 1}};
        CHECK_THROWS(rasterize({a}, gt, 10, 10));
    }
    SUBCASE("sub-pixel disc may cover zero pixels") {
        MaskGrid m = rasterize({disc(5.0, 5.0, 0.2)}, gt, 10, 10);
        // center (5.0, 5.0) is a pixel corner; no pixel center within 0.1
        for (auto v : m.values) CHECK(v == 0);
    }
}

TEST_CASE("rasterize polygon uses the even-odd rule") {
    GeoTransform gt{0, 8, 1};
    PlantAnnotation a;
    a.id = "p";
    a.species_id = 2;
    a.outline = {{1, 1}, {6, 1}, {6, 6}, {1, 6}};
    auto anns = std::vector{a};
    MaskGrid m = rasterize(anns, gt, 8, 8);
    MaskGrid oracle = brute_force_rasterize(anns, gt, 8, 8);
    CHECK(m.values == oracle.values);
    CHECK(m.at(4, 3) == 1);  // center (3.5, 3.5) inside
    CHECK(m.at(0, 0) == 0);
}

TEST_CASE("rasterize properties on random annotation sets") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(-2.0, 34.0), dia(0.0, 12.0);
    GeoTransform gt{0, 32, 1};
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<PlantAnnotation> a, b;
        for (int i = 0; i < 4; ++i) a.push_back(disc(pos(rng), pos(rng), dia(rng)));
        for (int i = 0; i < 4; ++i) b.push_back(disc(pos(rng), pos(rng), dia(rng)));

        MaskGrid ma = rasterize(a, gt, 32, 32);
        CHECK(ma.values == rasterize(a, gt, 32, 32).values);  // idempotence
        CHECK(ma.values == brute_force_rasterize(a, gt, 32, 32).values);

        std::vector<PlantAnnotation> both = a;
        both.insert(both.end(), b.begin(), b.end());
        MaskGrid mb = rasterize(b, gt, 32, 32);
        MaskGrid mu = rasterize(both, gt, 32, 32);
        for (size_t i = 0; i < mu.size(); ++i) {
            CHECK(mu.values[i] == std::max(ma.values[i], mb.values[i]));  // union property
            CHECK(mu.values[i] >= ma.values[i]);                          // monotonicity
        }
    }
}

TEST_CASE("annotation CSV round-trip") {
    std::vector<PlantAnnotation> anns{disc(1.25, 2.5, 0.4), disc(3, 4, 1)};
    anns[0].id = "a1";
    anns[1].id = "a2";
    anns[1].outline = {{0, 0}, {1, 0}, {1, 1}};
    std::stringstream ss;
    write_annotation_csv(ss, anns);
    auto back = parse_annotation_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "a1");
    CHECK(back[0].center_x == doctest::Approx(1.25));
    CHECK(back[1].outline.size() == 3);
    CHECK(back[1].outline[2] == std::pair{1.0, 1.0});
}

TEST_CASE("annotation CSV rejects malformed input") {
    std::stringstream missing_header("a1,1,0,0,1,\n");
    CHECK_THROWS(parse_annotation_csv(missing_header));
    std::stringstream short_poly("id,species_id,center_x_m,center_y_m,diameter_m,polygon\na,1,0,0,1,0 0;1 1\n");
    CHECK_THROWS(parse_annotation_csv(short_poly));
    std::stringstream negative_diameter("id,species_id,center_x_m,center_y_m,diameter_m,polygon\na,1,0,0,-1,\n");
    CHECK_THROWS(parse_annotation_csv(negative_diameter));
}
