#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cloak/errors.hpp"
#include "cloak/pattern.hpp"
#include "cloak/rng.hpp"
#include "support/oracles.hpp"

using namespace cloak;

TEST_CASE("init_pattern is deterministic for a fixed seed") {
    AdversarialPattern a = init_pattern(64, InitMode::kRandom, 7);
    AdversarialPattern b = init_pattern(64, InitMode::kRandom, 7);
    CHECK(a.pixels.data == b.pixels.data);
    AdversarialPattern c = init_pattern(64, InitMode::kRandom, 8);
    CHECK(a.pixels.data != c.pixels.data);
    for (double v : a.pixels.data) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("init_pattern texture mode") {
    Image gray(100, 100, 3, 0.5);
    AdversarialPattern p = init_pattern(100, InitMode::kTexture, 0, gray);
    for (double v : p.pixels.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    // Checkerboard 100x100 downsampled to 50 equals 2x2 average pooling.
    Image checker(100, 100, 3);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) {
            double v = ((x + y) & 1) ? 1.0 : 0.0;
            for (int c = 0; c < 3; ++c) checker.at(y, x, c) = v;
        }
    }
    AdversarialPattern q = init_pattern(50, InitMode::kTexture, 0, checker);
    for (int y = 0; y < 50; ++y) {
        for (int x = 0; x < 50; ++x) {
            double want = (checker.at(2 * y, 2 * x, 0) + checker.at(2 * y, 2 * x + 1, 0) +
                           checker.at(2 * y + 1, 2 * x, 0) + checker.at(2 * y + 1, 2 * x + 1, 0)) /
                          4.0;
            CHECK(q.pixels.at(y, x, 0) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("init_pattern errors") {
    CHECK_THROWS_AS(init_pattern(100, InitMode::kTexture, 0), MissingTexture);
    CHECK_THROWS(init_pattern(4, InitMode::kRandom, 0));
}

TEST_CASE("downsample identity and constants") {
    AdversarialPattern p = init_pattern(16, InitMode::kRandom, 3);
    AdversarialPattern same = downsample(p, 16);
    CHECK(same.pixels.data == p.pixels.data);

    Image constant(400, 400, 3, 0.37);
    AdversarialPattern cp{constant, 400, 0};
    AdversarialPattern half = downsample(cp, 200);
    CHECK(half.pixels.h == 200);
    for (double v : half.pixels.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("downsample 4->2 equals hand-computed block means") {
    Image g(4, 4, 1);
    double vals[4][4] = {{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}, {13, 14, 15, 16}};
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) g.at(y, x, 0) = vals[y][x];
    }
    Image d = downsample_image(g, 2);
    CHECK(d.at(0, 0, 0) == doctest::Approx(3.5));
    CHECK(d.at(0, 1, 0) == doctest::Approx(5.5));
    CHECK(d.at(1, 0, 0) == doctest::Approx(11.5));
    CHECK(d.at(1, 1, 0) == doctest::Approx(13.5));
}

TEST_CASE("downsample rejects non-divisible target") {
    AdversarialPattern p = init_pattern(16, InitMode::kRandom, 3);
    CHECK_THROWS_AS(downsample(p, 3), NonDivisibleTarget);
}

TEST_CASE("downsample commutes with constant shift") {
    Rng rng(4);
    Image img = oracle::random_image(rng, 12, 12, 3);
    for (double& v : img.data) v *= 0.5;  // keep room for +c
    double c = 0.25;
    Image shifted = img;
    for (double& v : shifted.data) v += c;
    Image a = downsample_image(shifted, 4);
    Image b = downsample_image(img, 4);
    for (size_t i = 0; i < a.data.size(); ++i) {
        CHECK(a.data[i] == doctest::Approx(b.data[i] + c).epsilon(1e-12));
    }
}

TEST_CASE("downsample gradient matches finite differences") {
    Rng rng(5);
    Image img = oracle::random_image(rng, 8, 8, 1);
    auto f = [&](const std::vector<double>& x) {
        Image p(8, 8, 1);
        p.data = x;
        Image d = downsample_image(p, 4);
        double s = 0.0;
        for (size_t i = 0; i < d.data.size(); ++i) s += (1.0 + 0.05 * static_cast<double>(i)) * d.data[i];
        return s;
    };
    Image upstream(4, 4, 1);
    for (size_t i = 0; i < upstream.data.size(); ++i) upstream.data[i] = 1.0 + 0.05 * static_cast<double>(i);
    Image analytic = downsample_backward(upstream, 8);
    auto numeric = oracle::central_diff(f, img.data, 1e-4);
    CHECK(oracle::rel_error(analytic.data, numeric) < 1e-4);
}

TEST_CASE("project clamps and is idempotent") {
    AdversarialPattern p = init_pattern(8, InitMode::kRandom, 1);
    p.pixels.at(0, 0, 0) = 1.3;
    p.pixels.at(0, 0, 1) = -0.2;
    AdversarialPattern q = project(p);
    CHECK(q.pixels.at(0, 0, 0) == 1.0);
    CHECK(q.pixels.at(0, 0, 1) == 0.0);
    AdversarialPattern r = project(q);
    CHECK(r.pixels.data == q.pixels.data);
}

TEST_CASE("export and import round-trip within 1/255") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cloak_pattern_test";
    fs::create_directories(dir);
    std::string path = (dir / "p.png").string();

    AdversarialPattern zeros{Image(16, 16, 3, 0.0), 16, 0};
    export_pattern(zeros, path);
    AdversarialPattern back = import_pattern(path);
    for (double v : back.pixels.data) CHECK(v == 0.0);

    AdversarialPattern ones{Image(16, 16, 3, 1.0), 16, 0};
    export_pattern(ones, path);
    back = import_pattern(path);
    for (double v : back.pixels.data) CHECK(v == 1.0);

    AdversarialPattern rnd = init_pattern(32, InitMode::kRandom, 99);
    export_pattern(rnd, path);
    back = import_pattern(path);
    CHECK(back.base_resolution == 32);
    double max_err = 0.0;
    for (size_t i = 0; i < rnd.pixels.data.size(); ++i) {
        max_err = std::max(max_err, std::abs(rnd.pixels.data[i] - back.pixels.data[i]));
    }
    CHECK(max_err <= 1.0 / 255.0 + 1e-12);
    fs::remove_all(dir);
}

TEST_CASE("export fails on bad path") {
    AdversarialPattern p = init_pattern(8, InitMode::kRandom, 1);
    CHECK_THROWS_AS(export_pattern(p, "/nonexistent-dir/deep/p.png"), IoFailure);
}
