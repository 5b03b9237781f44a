#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rexo/geometry.hpp"
#include "rexo/rng.hpp"
#include "rexo/scenegen.hpp"

using namespace rexo;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("ground constraint pins vertical center to half height") {
    DiffusedBox b;
    b[1] = 1.7;
    b[4] = 0.42;
    const DiffusedBox g = ground_constraint(b);
    CHECK(g[1] == 0.21);
    CHECK(g[4] == 0.42);

    Box3D p{1, 9, 2, 0.5, 1.8, 0.5};
    const Box3D gp = ground_box(p);
    CHECK(gp.cy == 0.9);
    CHECK(gp.h == 1.8);
    // idempotent, bit-exact
    const Box3D gg = ground_box(gp);
    CHECK(gg.cy == gp.cy);
}

TEST_CASE("normalize maps the axis midpoints to zero") {
    const SceneBounds bounds{};
    const Box3D mid{0, 1, 6.4, 1.28, 2, 6.4};
    const DiffusedBox d = normalize(mid, bounds);
    CHECK(d[0] == doctest::Approx(0).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0).epsilon(1e-12));
    CHECK(d[2] == doctest::Approx(0).epsilon(1e-12));
    CHECK(d[3] == doctest::Approx(-1.6));  // w = 1.28 is a tenth of the extent
    CHECK(d[4] == doctest::Approx(0));
    CHECK(d[5] == doctest::Approx(0));
}

TEST_CASE("normalize/denormalize round trip") {
    const SceneBounds bounds{};
    Rng rng(77);
    for (int k = 0; k < 200; ++k) {
        Box3D b{rng.uniform(-6.4, 6.4), rng.uniform(-1, 3), rng.uniform(0, 12.8),
                rng.uniform(0.01, 12), rng.uniform(0.01, 4), rng.uniform(0.01, 12)};
        const Box3D r = denormalize(normalize(b, bounds), bounds);
        CHECK(r.cx == doctest::Approx(b.cx).epsilon(1e-12));
        CHECK(r.cy == doctest::Approx(b.cy).epsilon(1e-12));
        CHECK(r.cz == doctest::Approx(b.cz).epsilon(1e-12));
        CHECK(r.w == doctest::Approx(b.w).epsilon(1e-12));
        CHECK(r.h == doctest::Approx(b.h).epsilon(1e-12));
        CHECK(r.d == doctest::Approx(b.d).epsilon(1e-12));
    }
}

TEST_CASE("denormalize clamps collapsed extents to the minimum size") {
    const SceneBounds bounds{};
    DiffusedBox d;
    d[3] = -50;  // far below the -scale edge that maps to zero size
    const Box3D b = denormalize(d, bounds);
    CHECK(b.w == kMinBoxSize);
}

TEST_CASE("clamp_to_scale bounds every component") {
    const SceneBounds bounds{};
    DiffusedBox d;
    for (int c = 0; c < 6; ++c) d[c] = (c % 2 ? 1 : -1) * 100.0;
    const DiffusedBox g = clamp_to_scale(d, bounds);
    for (int c = 0; c < 6; ++c) CHECK(std::abs(g[c]) <= bounds.scale);
}

TEST_CASE("diffusion-space grounding matches physical grounding at default bounds") {
    const SceneBounds bounds{};
    Rng rng(12);
    for (int k = 0; k < 100; ++k) {
        DiffusedBox d;
        // keep extents clear of the minimum-size clamp, which only the
        // physical route applies
        for (int c = 0; c < 3; ++c) d[c] = rng.uniform(-2, 2);
        for (int c = 3; c < 6; ++c) d[c] = rng.uniform(-1.5, 2);
        const Box3D via_diffusion = denormalize(ground_constraint(d), bounds);
        const Box3D via_physical = ground_box(denormalize(d, bounds));
        CHECK(via_diffusion.cy == doctest::Approx(via_physical.cy).epsilon(1e-12));
    }
}

TEST_CASE("box corners enumerate signs lexicographically") {
    const Box3D b{1, 2, 3, 2, 4, 6};
    const auto c = box_corners(b);
    CHECK(c[0] == Vec3{0, 0, 0});
    CHECK(c[1] == Vec3{0, 0, 6});
    CHECK(c[2] == Vec3{0, 4, 0});
    CHECK(c[3] == Vec3{0, 4, 6});
    CHECK(c[4] == Vec3{2, 0, 0});
    CHECK(c[5] == Vec3{2, 0, 6});
    CHECK(c[6] == Vec3{2, 4, 0});
    CHECK(c[7] == Vec3{2, 4, 6});
}

TEST_CASE("pinhole projection of a known point") {
    const CameraCalib calib = default_calib();
    // (5, 1.5, 10) -> camera frame (5, 0, 10) -> pixel (410, 120)
    const auto cam = radar_to_camera(box_corners(Box3D{5, 1.5, 10, 0, 0, 0}), calib);
    for (const Vec3& p : cam) {
        CHECK(p[0] == doctest::Approx(5));
        CHECK(p[1] == doctest::Approx(0));
        CHECK(p[2] == doctest::Approx(10));
    }
    const auto uv = pinhole_project(cam[0], calib);
    CHECK(uv[0] == doctest::Approx(410));
    CHECK(uv[1] == doctest::Approx(120));
}

TEST_CASE("image projection takes extrema over corners") {
    const CameraCalib calib = default_calib();
    const Box3D b{0, 1, 10, 1, 2, 1};  // depths 9.5 and 10.5 around z=10
    const auto cam = radar_to_camera(box_corners(b), calib);
    const ImageBox2D img = project_to_image(cam, calib);
    // widest at the near face: u span = fx * w / z_near
    CHECK(img.w == doctest::Approx(500 * 1.0 / 9.5));
    CHECK(img.cx == doctest::Approx(160));
    // vertical span mixes near/far faces through the y flip; bound it instead
    CHECK(img.h >= 500 * 2.0 / 10.5);
    CHECK(img.h <= 500 * 2.0 / 9.5);
}

TEST_CASE("behind-camera corners are rejected") {
    const CameraCalib calib = default_calib();
    const Box3D behind{0, 1, 21, 1, 1, 1};  // camera sits at z = 20 looking back
    const auto cam = radar_to_camera(box_corners(behind), calib);
    CHECK_THROWS_AS(project_to_image(cam, calib), std::domain_error);
}

TEST_CASE("offsets scale sizes exponentially") {
    const Box3D b{1, 1, 1, 2, 2, 2};
    BoxOffsets3D off;
    off.dw = std::log(2.0);
    off.dx = 0.5;
    const Box3D r = apply_offsets_3d(b, off);
    CHECK(r.w == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(r.cx == doctest::Approx(2.0));  // cx + w * dx
    CHECK(r.h == doctest::Approx(2.0));
}

TEST_CASE("size offsets are capped at 6250x growth") {
    const Box3D b{0, 0, 0, 1, 1, 1};
    BoxOffsets3D off;
    off.dw = 1000;   // way past the cap
    off.dh = -2.0;   // shrinking is never clipped
    const Box3D r = apply_offsets_3d(b, off);
    CHECK(r.w == doctest::Approx(6250.0).epsilon(1e-9));
    CHECK(r.h == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(std::exp(kMaxSizeOffset) == doctest::Approx(6250.0).epsilon(1e-12));
}

TEST_CASE("2d refinement offsets follow the same rule") {
    const ImageBox2D b{100, 50, 20, 10};
    BoxOffsets2D off{0.5, -1.0, std::log(0.6), std::log(0.85)};
    const ImageBox2D r = apply_refinement_offsets(b, off);
    CHECK(r.cx == doctest::Approx(110));
    CHECK(r.cy == doctest::Approx(40));
    CHECK(r.w == doctest::Approx(12).epsilon(1e-12));
    CHECK(r.h == doctest::Approx(8.5).epsilon(1e-12));
}

TEST_CASE("view projections split the box over both planes") {
    const Box3D b{1, 0.9, 5, 0.5, 1.8, 0.6};
    const auto [hor, ver] = project_to_views(b);
    CHECK(hor.view == View::horizontal);
    CHECK(hor.center_a == 1.0);
    CHECK(hor.center_b == 5.0);
    CHECK(hor.size_a == 0.5);
    CHECK(hor.size_b == 0.6);
    CHECK(ver.view == View::vertical);
    CHECK(ver.center_a == 0.9);
    CHECK(ver.center_b == 5.0);
    CHECK(ver.size_a == 1.8);
    CHECK(ver.size_b == 0.6);
}

TEST_CASE("giou closed forms") {
    const ImageBox2D a{0.5, 0.5, 1, 1}, b{2.5, 2.5, 1, 1};
    CHECK(giou(a, b) == doctest::Approx(-7.0 / 9.0).epsilon(1e-12));
    const ImageBox2D c{1, 1, 2, 2}, d{2, 2, 2, 2};
    CHECK(iou(c, d) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    CHECK(giou(a, a) == doctest::Approx(1.0));
    // unit cubes in opposite octant corners: hull 27, union 2
    const Box3D p{0.5, 0.5, 0.5, 1, 1, 1}, q{2.5, 2.5, 2.5, 1, 1, 1};
    CHECK(giou(p, q) == doctest::Approx(-25.0 / 27.0).epsilon(1e-12));
}

TEST_CASE("degenerate boxes follow the zero-measure convention") {
    const ImageBox2D z1{0, 0, 0, 0}, z2{5, 5, 0, 0};
    CHECK(iou(z1, z2) == 0.0);
    CHECK(giou(z1, z1) == 0.0);
}

TEST_CASE("giou never exceeds iou and iou never exceeds one") {
    Rng rng(5150);
    for (int k = 0; k < 2000; ++k) {
        const ImageBox2D p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 4),
                           rng.uniform(0, 4)};
        const ImageBox2D q{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 4),
                           rng.uniform(0, 4)};
        const double i = iou(p, q);
        CHECK(giou(p, q) <= i + 1e-12);
        CHECK(i <= 1.0);
        CHECK(i >= 0.0);
        CHECK(iou(p, q) == iou(q, p));
    }
}

TEST_CASE("calibration validation rejects bad rotations and intrinsics") {
    CameraCalib c = default_calib();
    CHECK_NOTHROW(c.validate());
    CameraCalib bad = c;
    bad.R[0] = 2;  // not orthonormal
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CameraCalib mirror = c;
    mirror.R = {1, 0, 0, 0, 1, 0, 0, 0, -1};  // det -1
    CHECK_THROWS_AS(mirror.validate(), std::invalid_argument);
    CameraCalib zoom = c;
    zoom.fx = 0;
    CHECK_THROWS_AS(zoom.validate(), std::invalid_argument);
}

TEST_CASE("scene bounds validation") {
    SceneBounds b;
    CHECK_NOTHROW(b.validate());
    b.x_max = b.x_min;
    CHECK_THROWS(b.validate());
    b = SceneBounds{};
    b.scale = 0;
    CHECK_THROWS(b.validate());
    CHECK(SceneBounds{}.extent(0) == doctest::Approx(12.8));
    CHECK(SceneBounds{}.extent(1) == doctest::Approx(4.0));
    CHECK(SceneBounds{}.axis_min(2) == doctest::Approx(0.0));
}

TEST_SUITE_END();
