/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: tests/test_raster.cpp
 *
 * Copyright 2026 The mf3d Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "test_support.hpp"

#include "catch_amalgamated.hpp"

using namespace mf3d;
using namespace mf3d::raster;
using Catch::Approx;

namespace {

/// A jittered grid mesh over [x0, x0 + size]^2 with front-facing triangles and random colors/depths.
struct GridMesh
{
    std::vector<Triangle> triangles;
    ScreenMesh mesh;
};

GridMesh grid_mesh(std::mt19937_64& rng, double x0, double y0, double size, int cells, double depth_lo,
                   double depth_hi)
{
    std::uniform_real_distribution<double> jitter(-0.2, 0.2), unit(0.05, 0.95), dz(depth_lo, depth_hi);
    const int side = cells + 1;
    GridMesh g;
    g.mesh.pixels.resize(side * side, 2);
    g.mesh.depth.resize(side * side);
    g.mesh.colors.resize(side * side, 3);
    const double step = size / cells;
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i)
        {
            const int v = j * side + i;
            const bool border = i == 0 || j == 0 || i == cells || j == cells;
            g.mesh.pixels.row(v) << x0 + step * (i + (border ? 0.0 : jitter(rng))),
                y0 + step * (j + (border ? 0.0 : jitter(rng)));
            g.mesh.depth(v) = dz(rng);
            g.mesh.colors.row(v) << unit(rng), unit(rng), unit(rng);
        }
    for (int j = 0; j < cells; ++j)
        for (int i = 0; i < cells; ++i)
        {
            const auto a = static_cast<std::uint32_t>(j * side + i);
            const auto b = a + 1, c = a + static_cast<std::uint32_t>(side), d = c + 1;
            // (a, c, b) and (b, c, d) have negative signed area with v pointing down.
            g.triangles.push_back({a, c, b});
            g.triangles.push_back({b, c, d});
        }
    g.mesh.triangles = &g.triangles;
    return g;
}

void check_buffer_invariants(const RenderOutput& out)
{
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
        {
            const auto pix = out.pixel(x, y);
            const bool covered = out.mask(x, y);
            CHECK(covered == (out.face_id[pix] >= 0));
            CHECK(covered == std::isfinite(out.depth[pix]));
            if (covered)
            {
                double sum = 0.0;
                for (int i = 0; i < 3; ++i)
                {
                    CHECK(out.bary[3 * pix + i] >= -1e-9);
                    sum += out.bary[3 * pix + i];
                }
                CHECK(sum == Approx(1.0).margin(1e-12));
            }
        }
}

bool same_image(const RenderOutput& a, const RenderOutput& b)
{
    return a.rgb.data == b.rgb.data && a.mask.data == b.mask.data && a.depth == b.depth;
}

bool bit_identical(const RenderOutput& a, const RenderOutput& b)
{
    return same_image(a, b) && a.face_id == b.face_id && a.tri_index == b.tri_index && a.bary == b.bary;
}

Scene three_face_scene(const assets::BasisBundle& bundle)
{
    Scene s;
    s.intr = camera::Intrinsics::with_default_focal(256, 256);
    std::mt19937_64 rng(77);
    s.faces.push_back(test::random_face(bundle, rng, 20.0, {100.0, 110.0}));
    s.faces.push_back(test::random_face(bundle, rng, 24.0, {150.0, 130.0}));
    s.faces.push_back(test::random_face(bundle, rng, 18.0, {128.0, 170.0}));
    return s;
}

} // namespace

TEST_CASE("full-frame triangle interpolates to one third at its centroid")
{
    std::vector<Triangle> tris{{0, 1, 2}};
    ScreenMesh m;
    m.pixels.resize(3, 2);
    m.pixels << 100.5, 100.5 - 2000.0, 100.5 - 1732.0, 100.5 + 1000.0, 100.5 + 1732.0, 100.5 + 1000.0;
    m.depth = Eigen::Vector3d(5.0, 5.0, 5.0);
    m.colors = VertexMatrix::Identity(3, 3);
    m.triangles = &tris;
    const std::vector<ScreenMesh> faces{m};
    const auto out = rasterize(faces, 256, 256);
    CHECK(out.mask.count() == 256u * 256u);
    for (int c = 0; c < 3; ++c)
        CHECK(out.rgb.at(100, 100, c) == Approx(1.0 / 3.0).margin(1e-6));
    check_buffer_invariants(out);

    // Reversed winding is culled.
    std::vector<Triangle> back{{0, 2, 1}};
    m.triangles = &back;
    const std::vector<ScreenMesh> culled{m};
    CHECK(rasterize(culled, 256, 256).mask.count() == 0);
}

TEST_CASE("perspective-correct barycentrics")
{
    // A screen triangle with unequal depths: the interpolated depth is the
    // harmonic blend and the weights follow 1/z.
    std::vector<Triangle> tris{{0, 1, 2}};
    ScreenMesh m;
    m.pixels.resize(3, 2);
    m.pixels << 10.0, 5.0, 2.0, 60.0, 60.0, 60.0;
    m.depth = Eigen::Vector3d(2.0, 4.0, 8.0);
    m.colors = VertexMatrix::Identity(3, 3);
    m.triangles = &tris;
    const std::vector<ScreenMesh> faces{m};
    const auto out = rasterize(faces, 64, 64);
    const int x = 20, y = 40;
    REQUIRE(out.mask(x, y));
    const double px = x + 0.5, py = y + 0.5;
    // Affine screen barycentrics by Cramer's rule.
    const Eigen::Vector2d a = m.pixels.row(0), b = m.pixels.row(1), c = m.pixels.row(2);
    Eigen::Matrix2d t;
    t << b.x() - a.x(), c.x() - a.x(), b.y() - a.y(), c.y() - a.y();
    const Eigen::Vector2d l = t.inverse() * Eigen::Vector2d(px - a.x(), py - a.y());
    const Eigen::Vector3d s(1.0 - l.x() - l.y(), l.x(), l.y());
    const Eigen::Vector3d q = s.cwiseQuotient(m.depth);
    const Eigen::Vector3d expect = q / q.sum();
    for (int i = 0; i < 3; ++i)
    {
        CHECK(out.bary[3 * out.pixel(x, y) + i] == Approx(expect(i)).epsilon(1e-12));
        CHECK(out.rgb.at(x, y, i) == Approx(expect(i)).epsilon(1e-12));
    }
    CHECK(out.depth[out.pixel(x, y)] == Approx(1.0 / q.sum()).epsilon(1e-12));
}

TEST_CASE("top-left rule assigns shared-edge pixels exactly once")
{
    // Two triangles sharing a diagonal that passes through pixel centers.
    std::vector<Triangle> tris{{0, 2, 1}, {1, 2, 3}};
    ScreenMesh m;
    m.pixels.resize(4, 2);
    m.pixels << 0.0, 0.0, 32.0, 0.0, 0.0, 32.0, 32.0, 32.0;
    m.depth = Eigen::Vector4d::Constant(3.0);
    m.colors = VertexMatrix::Ones(4, 3);
    m.triangles = &tris;
    const std::vector<ScreenMesh> faces{m};
    const auto out = rasterize(faces, 32, 32);
    // The square covers the whole frame: every pixel exactly once, none twice.
    CHECK(out.mask.count() == 32u * 32u);
    // Pixels on the diagonal x + y + 1 = 32 belong to exactly one triangle.
    for (int x = 0; x < 32; ++x)
    {
        const int y = 31 - x;
        CHECK(out.face_id[out.pixel(x, y)] == 0);
    }

    // Adjacent tiles of a grid: the coverage count equals the area for an integer-aligned square.
    std::mt19937_64 rng(1);
    auto g = grid_mesh(rng, 8.0, 8.0, 48.0, 6, 5.0, 5.0);
    const std::vector<ScreenMesh> grid{g.mesh};
    CHECK(rasterize(grid, 64, 64).mask.count() == 48u * 48u);
}

TEST_CASE("empty scenes render black with an empty mask")
{
    const std::vector<ScreenMesh> none;
    const auto out = rasterize(none, 64, 32);
    CHECK(out.mask.count() == 0);
    for (double v : out.rgb.data)
        CHECK(v == 0.0);
    check_buffer_invariants(out);

    const auto& bundle = test::bundle64();
    Scene s;
    s.intr = camera::Intrinsics::with_default_focal(64, 64);
    const auto r = render_scene(s, bundle);
    CHECK(r.mask.count() == 0);
    CHECK(r.width == 64);
}

TEST_CASE("a face fully behind another leaves the render unchanged")
{
    std::mt19937_64 rng(2);
    auto front = grid_mesh(rng, 8.0, 8.0, 48.0, 4, 3.0, 4.0);
    auto back = grid_mesh(rng, 16.0, 16.0, 24.0, 3, 9.0, 10.0);
    const std::vector<ScreenMesh> alone{front.mesh};
    const std::vector<ScreenMesh> both{back.mesh, front.mesh};
    const auto a = rasterize(alone, 64, 64), b = rasterize(both, 64, 64);
    CHECK(same_image(a, b));
    check_buffer_invariants(b);
}

TEST_CASE("joint render equals per-face renders composited by depth")
{
    const auto& bundle = test::bundle400();
    const auto scene = three_face_scene(bundle);
    const auto joint = render_scene(scene, bundle);
    check_buffer_invariants(joint);
    std::vector<RenderOutput> singles;
    for (const auto& f : scene.faces)
    {
        Scene one{scene.intr, {f}};
        singles.push_back(render_scene(one, bundle));
    }
    bool equal = true;
    int overlapping = 0;
    for (int y = 0; y < joint.height; ++y)
        for (int x = 0; x < joint.width; ++x)
        {
            const auto pix = joint.pixel(x, y);
            int best = -1, hits = 0;
            for (int k = 0; k < static_cast<int>(singles.size()); ++k)
                if (singles[k].mask(x, y))
                {
                    ++hits;
                    if (best < 0 || singles[k].depth[pix] < singles[best].depth[pix])
                        best = k;
                }
            overlapping += hits > 1;
            if (best < 0)
            {
                equal = equal && !joint.mask(x, y);
                continue;
            }
            for (int c = 0; c < 3; ++c)
                equal = equal && joint.rgb.at(x, y, c) == singles[best].rgb.at(x, y, c);
            equal = equal && joint.depth[pix] == singles[best].depth[pix] && joint.face_id[pix] == best;
        }
    CHECK(equal);
    CHECK(overlapping > 0);
}

TEST_CASE("render is deterministic across runs, thread counts and face order")
{
    const auto& bundle = test::bundle400();
    const auto scene = three_face_scene(bundle);
    set_num_threads(1);
    const auto ref = render_scene(scene, bundle);
    CHECK(bit_identical(ref, render_scene(scene, bundle)));
    set_num_threads(4);
    CHECK(bit_identical(ref, render_scene(scene, bundle)));
    CHECK(bit_identical(ref, render_scene(scene, bundle)));
    set_num_threads(1);

    Scene permuted = scene;
    std::swap(permuted.faces[0], permuted.faces[2]);
    const auto p = render_scene(permuted, bundle);
    CHECK(same_image(ref, p));
}

TEST_CASE("mean face renders over the frame center")
{
    const auto& bundle = test::bundle400();
    Scene s;
    s.intr = camera::Intrinsics::with_default_focal(256, 256);
    s.faces.push_back(morphable::FaceParams::mean_face(bundle, 20.0, {128.0, 128.0}));
    const auto out = render_scene(s, bundle);
    CHECK(out.mask(128, 128));
    CHECK(out.mask.count() > 1000);
    CHECK_FALSE(out.mask(2, 2));
}

TEST_CASE("color gradients are the exact adjoint of interpolation")
{
    std::mt19937_64 rng(3);
    auto a = grid_mesh(rng, 4.0, 4.0, 40.0, 5, 4.0, 6.0);
    auto b = grid_mesh(rng, 20.0, 22.0, 40.0, 4, 3.0, 7.0);
    std::vector<ScreenMesh> faces{a.mesh, b.mesh};
    const auto out = rasterize(faces, 64, 64);
    std::vector<std::pair<int, int>> covered;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (out.mask(x, y))
                covered.emplace_back(x, y);
    std::shuffle(covered.begin(), covered.end(), rng);
    covered.resize(100);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Image g(64, 64, 3);
    for (auto [x, y] : covered)
        for (int c = 0; c < 3; ++c)
            g.at(x, y, c) = uni(rng);
    const auto grads = rasterize_backward(g, out, faces);
    auto objective = [&](const std::vector<ScreenMesh>& fs) {
        const auto o = rasterize(fs, 64, 64);
        double s = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            s += g.data[i] * o.rgb.data[i];
        return s;
    };
    for (std::size_t f = 0; f < faces.size(); ++f)
    {
        Eigen::VectorXd analytic(faces[f].colors.size()), numeric(faces[f].colors.size());
        for (Eigen::Index v = 0; v < faces[f].colors.rows(); ++v)
            for (int c = 0; c < 3; ++c)
            {
                auto fp = faces, fm = faces;
                fp[f].colors(v, c) += 1e-4;
                fm[f].colors(v, c) -= 1e-4;
                numeric(3 * v + c) = (objective(fp) - objective(fm)) / 2e-4;
                analytic(3 * v + c) = grads[f].colors(v, c);
            }
        CHECK(test::grad_rel_err(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("position and depth gradients match finite differences at interior pixels")
{
    std::mt19937_64 rng(4);
    auto a = grid_mesh(rng, 4.0, 4.0, 40.0, 3, 4.0, 6.0);
    auto b = grid_mesh(rng, 24.0, 20.0, 36.0, 3, 3.0, 7.0);
    std::vector<ScreenMesh> faces{a.mesh, b.mesh};
    const auto out = rasterize(faces, 64, 64);
    const Mask interior = interior_pixels(out, faces, 2.0);
    REQUIRE(interior.count() > 200);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Image g(64, 64, 3);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (interior(x, y))
                for (int c = 0; c < 3; ++c)
                    g.at(x, y, c) = uni(rng);
    const auto grads = rasterize_backward(g, out, faces);
    auto objective = [&](const std::vector<ScreenMesh>& fs) {
        const auto o = rasterize(fs, 64, 64);
        double s = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            s += g.data[i] * o.rgb.data[i];
        return s;
    };
    const double h = 1e-3;
    for (std::size_t f = 0; f < faces.size(); ++f)
    {
        const auto n = faces[f].pixels.rows();
        Eigen::VectorXd analytic(3 * n), numeric(3 * n);
        for (Eigen::Index v = 0; v < n; ++v)
        {
            for (int k = 0; k < 3; ++k)
            {
                auto fp = faces, fm = faces;
                if (k < 2)
                {
                    fp[f].pixels(v, k) += h;
                    fm[f].pixels(v, k) -= h;
                    analytic(3 * v + k) = grads[f].pixels(v, k);
                } else
                {
                    fp[f].depth(v) += h;
                    fm[f].depth(v) -= h;
                    analytic(3 * v + k) = grads[f].depth(v);
                }
                numeric(3 * v + k) = (objective(fp) - objective(fm)) / (2.0 * h);
            }
        }
        CHECK(test::grad_rel_err(analytic, numeric) < 1e-3);
    }
}

TEST_CASE("uncovered pixels contribute nothing and mismatched buffers are rejected")
{
    std::mt19937_64 rng(5);
    auto a = grid_mesh(rng, 10.0, 10.0, 20.0, 2, 4.0, 6.0);
    std::vector<ScreenMesh> faces{a.mesh};
    const auto out = rasterize(faces, 64, 64);
    Image g(64, 64, 3);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (!out.mask(x, y))
                for (int c = 0; c < 3; ++c)
                    g.at(x, y, c) = 1.0;
    const auto grads = rasterize_backward(g, out, faces);
    CHECK(grads[0].colors.isZero());
    CHECK(grads[0].pixels.isZero());
    CHECK(grads[0].depth.isZero());

    try
    {
        rasterize_backward(Image(32, 64, 3), out, faces);
        FAIL("expected buffer_mismatch");
    } catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::buffer_mismatch);
    }
    const std::vector<ScreenMesh> none;
    CHECK_THROWS_AS(rasterize_backward(g, out, none), Error);
}

TEST_CASE("position gradient predicts the sign of color changes")
{
    std::mt19937_64 rng(6);
    auto a = grid_mesh(rng, 2.0, 2.0, 60.0, 3, 4.0, 8.0);
    std::vector<ScreenMesh> faces{a.mesh};
    const auto out = rasterize(faces, 64, 64);
    const Mask interior = interior_pixels(out, faces, 2.0);
    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (interior(x, y))
                pixels.emplace_back(x, y);
    REQUIRE(!pixels.empty());
    std::uniform_int_distribution<std::size_t> pick(0, pixels.size() - 1);
    std::uniform_int_distribution<int> corner(0, 2);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    int agree = 0, total = 0;
    for (int trial = 0; trial < 1000; ++trial)
    {
        const auto [x, y] = pixels[pick(rng)];
        const auto pix = out.pixel(x, y);
        const auto& tri = a.triangles[out.tri_index[pix]];
        const auto v = tri[corner(rng)];
        // In-triangle direction: from the vertex toward the pixel.
        const Eigen::Vector2d dir =
            (Eigen::Vector2d(x + 0.5, y + 0.5) - a.mesh.pixels.row(v).transpose()).normalized() * 1e-3;
        const Eigen::Vector3d w(uni(rng), uni(rng), uni(rng));
        Image g(64, 64, 3);
        for (int c = 0; c < 3; ++c)
            g.at(x, y, c) = w(c);
        const auto grads = rasterize_backward(g, out, faces);
        const double predicted = grads[0].pixels.row(v).dot(dir.transpose());
        auto moved = faces;
        moved[0].pixels.row(v) += dir.transpose();
        const auto o = rasterize(moved, 64, 64);
        double actual = 0.0;
        for (int c = 0; c < 3; ++c)
            actual += w(c) * (o.rgb.at(x, y, c) - out.rgb.at(x, y, c));
        if (std::abs(predicted) < 1e-12 && std::abs(actual) < 1e-12)
            continue;
        ++total;
        agree += (predicted > 0.0) == (actual > 0.0);
    }
    REQUIRE(total > 900);
    CHECK(agree >= 0.99 * total);
}
