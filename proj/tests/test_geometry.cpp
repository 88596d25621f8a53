#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cloak/errors.hpp"
#include "cloak/geometry.hpp"
#include "cloak/rng.hpp"
#include "support/oracles.hpp"

using namespace cloak;

namespace {

Quad unit_square() { return Quad{{Vec2{0, 0}, Vec2{1, 0}, Vec2{1, 1}, Vec2{0, 1}}}; }

Quad random_quad(Rng& rng, double lo, double hi) {
    // Corners jittered around a convex base so the quad stays simple.
    double cx = rng.uniform(lo + 2, hi - 2), cy = rng.uniform(lo + 2, hi - 2);
    double r = rng.uniform(1.0, (hi - lo) / 2 - 1);
    Quad q;
    const double angles[4] = {-2.2, -0.9, 0.9, 2.2};
    for (int i = 0; i < 4; ++i) {
        double a = angles[i] + rng.uniform(-0.3, 0.3);
        double rr = r * rng.uniform(0.7, 1.3);
        q.points[static_cast<size_t>(i)] = {cx + rr * std::cos(a), cy + rr * std::sin(a)};
    }
    return q;
}

}  // namespace

TEST_CASE("solve_homography identity") {
    Homography h = solve_homography(unit_square(), unit_square());
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            CHECK(h(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("solve_homography translation") {
    Quad dst = unit_square();
    for (auto& p : dst.points) {
        p.x += 5;
        p.y += 3;
    }
    Homography h = solve_homography(unit_square(), dst);
    CHECK(h(0, 2) == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(h(1, 2) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(h(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(h(1, 1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(h(2, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(h(2, 1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("solve_homography re-projection on random quads") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        Quad src = random_quad(rng, 0, 50);
        Quad dst = random_quad(rng, 0, 80);
        if (!quad_is_valid(src) || !quad_is_valid(dst)) continue;
        Homography h = solve_homography(src, dst);
        for (int i = 0; i < 4; ++i) {
            Vec2 p = h.apply(src.points[static_cast<size_t>(i)]);
            double err = std::hypot(p.x - dst.points[static_cast<size_t>(i)].x,
                                    p.y - dst.points[static_cast<size_t>(i)].y);
            CHECK(err < 1e-6);
        }
        CHECK(h.m[8] == doctest::Approx(1.0));
        CHECK(std::abs(h.det()) > 1e-9);
    }
}

TEST_CASE("solve_homography rejects degenerate quads") {
    Quad collinear{{Vec2{0, 0}, Vec2{1, 1}, Vec2{2, 2}, Vec2{0, 1}}};
    CHECK_THROWS_AS(solve_homography(collinear, unit_square()), DegenerateQuad);
    Quad bowtie{{Vec2{0, 0}, Vec2{1, 1}, Vec2{1, 0}, Vec2{0, 1}}};
    CHECK_THROWS_AS(solve_homography(unit_square(), bowtie), DegenerateQuad);
}

TEST_CASE("warp identity returns the input exactly") {
    Rng rng(7);
    Image pat = oracle::random_image(rng, 5, 5, 3);
    Image out = warp_pattern(pat, Homography{}, 5, 5);
    for (size_t i = 0; i < pat.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(pat.data[i]).epsilon(1e-12));
}

TEST_CASE("warp integer translation shifts columns") {
    Rng rng(8);
    Image pat = oracle::random_image(rng, 4, 4, 1);
    Homography h;
    h(0, 2) = 1.0;  // translate +1 in x
    Image out = warp_pattern(pat, h, 4, 4);
    for (int y = 0; y < 4; ++y) {
        CHECK(out.at(y, 0, 0) == doctest::Approx(0.0));  // vacated column
        for (int x = 1; x < 4; ++x) {
            CHECK(out.at(y, x, 0) == doctest::Approx(pat.at(y, x - 1, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("warp matches per-pixel oracle on small grids and rotations") {
    // 90-degree rotation of a 2x2 grid about its center.
    Quad src = Quad::from_extent(2, 2);
    Quad dst{{Vec2{2, 0}, Vec2{2, 2}, Vec2{0, 2}, Vec2{0, 0}}};
    Homography h = solve_homography(src, dst);
    Rng rng(9);
    Image pat = oracle::random_image(rng, 2, 2, 1);
    Image got = warp_pattern(pat, h, 2, 2);
    Image want = oracle::warp_oracle(pat, h, 2, 2);
    for (size_t i = 0; i < got.data.size(); ++i) {
        CHECK(std::abs(got.data[i] - want.data[i]) <= 1e-9);
    }

    // Random perspective warps on 4x4 grids.
    for (int trial = 0; trial < 50; ++trial) {
        Quad rs = Quad::from_extent(4, 4);
        Quad rd = random_quad(rng, 0, 8);
        if (!quad_is_valid(rd)) continue;
        Homography rh = solve_homography(rs, rd);
        Image p4 = oracle::random_image(rng, 4, 4, 3);
        Image g = warp_pattern(p4, rh, 6, 6);
        Image w = oracle::warp_oracle(p4, rh, 6, 6);
        for (size_t i = 0; i < g.data.size(); ++i) CHECK(std::abs(g.data[i] - w.data[i]) <= 1e-9);
    }
}

TEST_CASE("warp is linear in the pattern") {
    Rng rng(10);
    Quad dst = random_quad(rng, 0, 12);
    Homography h = solve_homography(Quad::from_extent(6, 6), dst);
    Image p1 = oracle::random_image(rng, 6, 6, 3);
    Image p2 = oracle::random_image(rng, 6, 6, 3);
    double a = 0.37, b = -1.21;
    Image mix(6, 6, 3);
    for (size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * p1.data[i] + b * p2.data[i];
    Image wm = warp_pattern(mix, h, 10, 10);
    Image w1 = warp_pattern(p1, h, 10, 10);
    Image w2 = warp_pattern(p2, h, 10, 10);
    for (size_t i = 0; i < wm.data.size(); ++i) {
        CHECK(std::abs(wm.data[i] - (a * w1.data[i] + b * w2.data[i])) < 1e-6);
    }
}

TEST_CASE("warp gradient matches finite differences") {
    Rng rng(11);
    Quad dst = random_quad(rng, 0, 10);
    Homography h = solve_homography(Quad::from_extent(6, 6), dst);
    WarpPlan plan = make_warp_plan(h, 6, 6, 8, 8);
    Image pat = oracle::random_image(rng, 6, 6, 1);

    auto f = [&](const std::vector<double>& x) {
        Image p(6, 6, 1);
        p.data = x;
        Image out = apply_warp(plan, p);
        double s = 0.0;
        for (double v : out.data) s += v;
        return s;
    };
    Image ones(8, 8, 1, 1.0);
    Image analytic = warp_backward(plan, ones);
    auto numeric = oracle::central_diff(f, pat.data, 1e-4);
    CHECK(oracle::rel_error(analytic.data, numeric) < 1e-4);
}

TEST_CASE("rasterize_polygon full-cover rectangle is all ones") {
    std::vector<Vec2> rect = {{0, 0}, {8, 0}, {8, 8}, {0, 8}};
    MaskImage m = rasterize_polygon(rect, 8, 8);
    for (double v : m.data) CHECK(v == 1.0);
}

TEST_CASE("rasterize_polygon rejects degenerate input") {
    CHECK_THROWS_AS(rasterize_polygon({{0, 0}, {4, 4}}, 8, 8), DegeneratePolygon);
    CHECK_THROWS_AS(rasterize_polygon({{0, 0}, {4, 4}, {8, 8}}, 8, 8), DegeneratePolygon);
}

TEST_CASE("rasterize_polygon matches even-odd oracle") {
    std::vector<Vec2> tri = {{1.3, 0.7}, {14.6, 3.2}, {4.1, 15.4}};
    MaskImage got = rasterize_polygon(tri, 16, 16);
    MaskImage want = oracle::mask_oracle(tri, 16, 16);
    for (size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == want.data[i]);

    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Vec2> poly;
        double cx = rng.uniform(4, 12), cy = rng.uniform(4, 12);
        int sides = rng.uniform_int(3, 7);
        for (int i = 0; i < sides; ++i) {
            double a = 2 * 3.14159265358979 * i / sides + rng.uniform(0, 0.4);
            double r = rng.uniform(2, 6);
            poly.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
        }
        if (!polygon_is_simple(poly)) continue;
        MaskImage g = rasterize_polygon(poly, 16, 16);
        MaskImage w = oracle::mask_oracle(poly, 16, 16);
        for (size_t i = 0; i < g.data.size(); ++i) CHECK(g.data[i] == w.data[i]);
    }
}

TEST_CASE("mask values are binary") {
    std::vector<Vec2> poly = {{2.2, 1.1}, {13.7, 2.9}, {11.3, 13.8}, {3.4, 12.2}};
    MaskImage m = rasterize_polygon(poly, 16, 16);
    for (double v : m.data) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("composite extremes and formula") {
    Rng rng(13);
    Image a = oracle::random_image(rng, 6, 6, 3);
    Image b = oracle::random_image(rng, 6, 6, 3);

    MaskImage zeros(6, 6, 1, 0.0);
    Image out0 = composite(a, b, zeros);
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(out0.data[i] == a.data[i]);

    MaskImage ones(6, 6, 1, 1.0);
    Image out1 = composite(a, b, ones);
    for (size_t i = 0; i < b.data.size(); ++i) CHECK(out1.data[i] == b.data[i]);

    MaskImage half(6, 6, 1, 0.0);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 3; ++x) half.at(y, x, 0) = 1.0;
    }
    Image out = composite(a, b, half);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
            for (int c = 0; c < 3; ++c) {
                double want = x < 3 ? b.at(y, x, c) : a.at(y, x, c);
                CHECK(out.at(y, x, c) == want);
            }
        }
    }
}

TEST_CASE("composite dimension mismatch throws") {
    Image a(4, 4, 3), b(4, 5, 3);
    MaskImage m(4, 4, 1);
    CHECK_THROWS_AS(composite(a, b, m), DimensionMismatch);
}

TEST_CASE("compositing partition: complementary composites sum to I + P") {
    Rng rng(14);
    Image a = oracle::random_image(rng, 7, 5, 3);
    Image b = oracle::random_image(rng, 7, 5, 3);
    MaskImage m(7, 5, 1);
    for (double& v : m.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    Image u = composite(a, b, m);
    Image w = composite(b, a, m);
    for (size_t i = 0; i < u.data.size(); ++i) {
        CHECK(u.data[i] + w.data[i] == doctest::Approx(a.data[i] + b.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("composite gradient wrt pattern matches finite differences") {
    Rng rng(15);
    Image orig = oracle::random_image(rng, 5, 5, 2);
    Image warped = oracle::random_image(rng, 5, 5, 2);
    MaskImage m(5, 5, 1);
    for (double& v : m.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;

    auto f = [&](const std::vector<double>& x) {
        Image wp(5, 5, 2);
        wp.data = x;
        Image out = composite(orig, wp, m);
        double s = 0.0;
        for (size_t i = 0; i < out.data.size(); ++i) s += (1.0 + 0.01 * static_cast<double>(i)) * out.data[i];
        return s;
    };
    Image upstream(5, 5, 2);
    for (size_t i = 0; i < upstream.data.size(); ++i) upstream.data[i] = 1.0 + 0.01 * static_cast<double>(i);
    Image analytic = composite_backward_pattern(m, upstream);
    auto numeric = oracle::central_diff(f, warped.data, 1e-4);
    CHECK(oracle::rel_error(analytic.data, numeric) < 1e-4);
}

TEST_CASE("min_area_obb recovers a rotated rectangle") {
    Rng rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        double cx = rng.uniform(-5, 5), cy = rng.uniform(-5, 5);
        double w = rng.uniform(2, 6), h = rng.uniform(1, 3);
        double ang = rng.uniform(-1.2, 1.2);
        std::vector<Vec2> pts;
        for (int i = 0; i < 4; ++i) {
            double sx = (i == 1 || i == 2) ? 1 : -1;
            double sy = (i >= 2) ? 1 : -1;
            double x = sx * w / 2, y = sy * h / 2;
            pts.push_back({cx + x * std::cos(ang) - y * std::sin(ang),
                           cy + x * std::sin(ang) + y * std::cos(ang)});
        }
        auto obb = min_area_obb(pts);
        double area = std::abs(polygon_area({obb.begin(), obb.end()}));
        CHECK(area == doctest::Approx(w * h).epsilon(1e-6));
    }
}
