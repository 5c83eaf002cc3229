// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "reganie/toyworld/toyworld.hpp"

using namespace reganie;
using namespace reganie::toyworld;

TEST_CASE("render is deterministic and in range") {
    SceneSpec s;
    s.center_x = 0.5;
    s.center_y = 0.5;
    s.size = 0.3;
    s.hue = 0.1;
    s.bg_hue = 0.6;
    auto a = render_scene(s, 64);
    auto b = render_scene(s, 64);
    CHECK(std::memcmp(a.ptr(), b.ptr(), sizeof(double) * a.numel()) == 0);
    CHECK(a.all_finite());
    for (int64_t i = 0; i < a.numel(); ++i) {
        CHECK(a[i] >= -1.0);
        CHECK(a[i] <= 1.0);
    }
}

TEST_CASE("validation errors name the offending field") {
    SceneSpec s;
    s.size = 0.9;
    CHECK_THROWS_WITH_AS(render_scene(s, 64), doctest::Contains("size"), ValidationError);
    s.size = 0.25;
    s.center_x = 0.05;
    CHECK_THROWS_WITH_AS(render_scene(s, 64), doctest::Contains("center_x"), ValidationError);
    s.center_x = 0.5;
    CHECK_THROWS_AS(render_scene(s, 48), ValidationError);  // not a power of two
    CHECK_THROWS_AS(render_scene(s, 16), ValidationError);
}

TEST_CASE("centered disk round-trips through the oracle within a pixel") {
    SceneSpec s;
    s.center_x = 0.5;
    s.center_y = 0.5;
    s.size = 0.3;
    s.hue = 0.95;
    s.bg_hue = 0.45;
    auto img = render_scene(s, 64);
    auto e = estimate_attributes(img);
    CHECK(e.center_x == doctest::Approx(0.5).epsilon(1.0 / 64));
    CHECK(e.center_y == doctest::Approx(0.5).epsilon(1.0 / 64));
    CHECK(e.shape_kind == ShapeKind::Disk);
}

TEST_CASE("oracle round trip: >=95% of 200 random specs within 0.02") {
    Rng rng(42);
    int ok = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        SceneSpec s = sample_spec(rng);
        auto e = estimate_attributes(render_scene(s, 64));
        const bool good = std::fabs(e.center_x - s.center_x) <= 0.02 &&
                          std::fabs(e.center_y - s.center_y) <= 0.02 &&
                          std::fabs(e.size - s.size) <= 0.02;
        ok += good;
    }
    CHECK(ok >= (int)(0.95 * n));
}

TEST_CASE("uniform background raises no-shape") {
    SceneSpec s;
    s.hue = 0.5;
    s.bg_hue = 0.5;  // bypass sampling separation on purpose
    s.size = 0.3;
    auto img = render_scene(s, 64);  // fg==bg hue, but brighter: hue identical
    CHECK_THROWS_AS(estimate_attributes(img), NoShapeError);
}

TEST_CASE("estimated size is monotone in true size") {
    SceneSpec a, b;
    a.size = 0.2;
    b.size = 0.3;
    a.hue = b.hue = 0.1;
    a.bg_hue = b.bg_hue = 0.6;
    auto ea = estimate_attributes(render_scene(a, 64));
    auto eb = estimate_attributes(render_scene(b, 64));
    CHECK(ea.size < eb.size);
}

TEST_CASE("overlay: mask area bound, off-mask bitwise equality, idempotence") {
    SceneSpec s;
    s.hue = 0.2;
    s.bg_hue = 0.7;
    auto img = render_scene(s, 64);

    OverlaySpec o;
    o.glyph = Glyph::Ring;
    o.scale = 0.1;
    o.x = o.y = 0.3;
    auto [out, mask] = apply_overlay(img, o);

    int64_t area = 0;
    for (int64_t i = 0; i < mask.numel(); ++i) area += mask[i];
    const double nominal = M_PI * std::pow(0.1 * 64 / 2, 2);
    CHECK(area >= 0.5 * nominal);
    CHECK(area <= 2.0 * nominal);

    for (int h = 0; h < 64; ++h)
        for (int w = 0; w < 64; ++w)
            if (!mask[h * 64 + w])
                for (int c = 0; c < 3; ++c)
                    CHECK(out[(c * 64 + h) * 64 + w] == img[(c * 64 + h) * 64 + w]);

    auto [out2, mask2] = apply_overlay(out, o);
    CHECK(std::memcmp(out.ptr(), out2.ptr(), sizeof(double) * out.numel()) == 0);
}

TEST_CASE("overlay validation") {
    OverlaySpec o;
    o.scale = 0.2;
    CHECK_THROWS_AS(o.validate(), ValidationError);
    o.scale = 0.1;
    o.x = 0.01;
    CHECK_THROWS_AS(o.validate(), ValidationError);
}

TEST_CASE("sample_dataset: reproducible, n=0 rejected, centered on average") {
    auto a = sample_dataset(10, 7, 32);
    auto b = sample_dataset(10, 7, 32);
    REQUIRE(a.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(std::memcmp(a[i].first.ptr(), b[i].first.ptr(),
                          sizeof(double) * a[i].first.numel()) == 0);
        CHECK(a[i].second.center_x == b[i].second.center_x);
    }
    CHECK_THROWS_AS(sample_dataset(0, 7, 32), ValidationError);

    Rng rng(123);
    double mean_cx = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) mean_cx += sample_spec(rng).center_x;
    mean_cx /= n;
    CHECK(mean_cx == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("dataset export writes files plus a matching manifest") {
    const std::string dir = "/tmp/reganie_test_dataset";
    std::filesystem::remove_all(dir);
    auto data = sample_dataset(5, 3, 32);
    export_dataset(dir, data);
    int files = 0;
    for (auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".ppm") ++files;
    CHECK(files == 5);

    std::ifstream mf(dir + "/manifest.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(mf, line)) {
        auto j = nlohmann::json::parse(line);
        for (const char* k : {"file", "shape_kind", "cx", "cy", "size", "hue", "bg_hue"})
            CHECK(j.contains(k));
        ++lines;
    }
    CHECK(lines == 5);

    // image files round-trip within 8-bit quantization
    auto img = read_ppm<double>(dir + "/img_00000.ppm");
    double max_err = 0;
    for (int64_t i = 0; i < img.numel(); ++i)
        max_err = std::max(max_err, std::fabs(img[i] - data[0].first[i]));
    CHECK(max_err <= 1.0 / 255);
}

TEST_CASE("ppm grid layout") {
    SceneSpec s;
    s.hue = 0.1;
    s.bg_hue = 0.6;
    auto img = render_scene(s, 32);
    auto grid = image_grid<double>({img, img, img});
    CHECK(grid.dim(2) == 3 * 32 + 2 * 2);
}
