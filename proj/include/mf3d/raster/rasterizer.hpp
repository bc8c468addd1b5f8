/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/raster/rasterizer.hpp
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
#pragma once

#ifndef MF3D_RASTER_RASTERIZER_HPP
#define MF3D_RASTER_RASTERIZER_HPP

#include "mf3d/camera/camera.hpp"
#include "mf3d/core/error.hpp"
#include "mf3d/core/parallel.hpp"
#include "mf3d/core/types.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace mf3d {
namespace raster {

/// Rows per work tile. Fixed so the tiling never depends on the thread count.
inline constexpr int kTileRows = 16;

/**
 * A mesh already in screen space: pixel positions, camera depths and
 * per-vertex colors. Triangles are counter-clockwise seen from outside, which
 * is a negative signed area in (u right, v down) pixel coordinates.
 */
struct ScreenMesh
{
    Points2 pixels;
    Eigen::VectorXd depth;
    VertexMatrix colors;
    const std::vector<Triangle>* triangles = nullptr;
};

/**
 * Image plus auxiliary buffers. For covered pixels, face_id/tri_index name the
 * visible triangle, bary holds its perspective-correct weights (3 per pixel)
 * and depth the interpolated camera depth; empty pixels have face_id -1 and
 * infinite depth.
 */
struct RenderOutput
{
    int width = 0;
    int height = 0;
    Image rgb;
    Mask mask;
    std::vector<double> depth;
    std::vector<std::int32_t> face_id;
    std::vector<std::int32_t> tri_index;
    std::vector<double> bary;

    std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// Per-face gradients from rasterize_backward.
struct MeshGrad
{
    VertexMatrix colors;
    Points2 pixels;
    Eigen::VectorXd depth;
};

namespace detail {

struct TriSetup
{
    std::int32_t face;
    std::int32_t tri;
    int x0, x1, y0, y1;
};

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Edge value E_i >= 0 inside a front-facing triangle, for the edge opposite vertex i.
inline double edge_value(const Eigen::Vector2d& pa, const Eigen::Vector2d& pb, double px, double py)
{
    return -cross2(pa.x() - px, pa.y() - py, pb.x() - px, pb.y() - py);
}

// Top-left rule: pixels exactly on an edge belong to it only for left edges
// (interior toward +u) or top edges (horizontal, interior toward +v).
inline bool owns_edge(const Eigen::Vector2d& pa, const Eigen::Vector2d& pb)
{
    const double a = pb.y() - pa.y();
    const double b = pa.x() - pb.x();
    return a > 0.0 || (a == 0.0 && b > 0.0);
}

inline std::vector<TriSetup> setup_triangles(std::span<const ScreenMesh> faces, int width, int height)
{
    std::vector<TriSetup> setups;
    for (std::size_t f = 0; f < faces.size(); ++f)
    {
        const auto& mesh = faces[f];
        const auto& tris = *mesh.triangles;
        for (std::size_t t = 0; t < tris.size(); ++t)
        {
            const auto& tri = tris[t];
            const Eigen::Vector2d p0 = mesh.pixels.row(tri[0]), p1 = mesh.pixels.row(tri[1]),
                                  p2 = mesh.pixels.row(tri[2]);
            if (!(mesh.depth(tri[0]) > 0.0 && mesh.depth(tri[1]) > 0.0 && mesh.depth(tri[2]) > 0.0))
                continue;
            const double area = cross2(p1.x() - p0.x(), p1.y() - p0.y(), p2.x() - p0.x(), p2.y() - p0.y());
            if (!(area < 0.0)) // back-facing or degenerate
                continue;
            const double umin = std::min({p0.x(), p1.x(), p2.x()}), umax = std::max({p0.x(), p1.x(), p2.x()});
            const double vmin = std::min({p0.y(), p1.y(), p2.y()}), vmax = std::max({p0.y(), p1.y(), p2.y()});
            TriSetup s;
            s.face = static_cast<std::int32_t>(f);
            s.tri = static_cast<std::int32_t>(t);
            s.x0 = static_cast<int>(std::max(0.0, std::floor(umin - 0.5)));
            s.x1 = static_cast<int>(std::min(width - 1.0, std::ceil(umax - 0.5)));
            s.y0 = static_cast<int>(std::max(0.0, std::floor(vmin - 0.5)));
            s.y1 = static_cast<int>(std::min(height - 1.0, std::ceil(vmax - 0.5)));
            if (s.x0 > s.x1 || s.y0 > s.y1)
                continue;
            setups.push_back(s);
        }
    }
    return setups;
}

} /* namespace detail */

/**
 * Z-buffered rasterization of all faces in one pass, with perspective-correct
 * barycentric color interpolation, back-face culling and the top-left fill
 * rule. Equal depths resolve to the smaller (face, triangle) index, so the
 * output is bit-identical for any thread count.
 */
inline RenderOutput rasterize(std::span<const ScreenMesh> faces, int width, int height)
{
    RenderOutput out;
    out.width = width;
    out.height = height;
    const std::size_t npix = static_cast<std::size_t>(width) * height;
    out.rgb = Image(width, height, 3);
    out.mask = Mask(width, height);
    out.depth.assign(npix, std::numeric_limits<double>::infinity());
    out.face_id.assign(npix, -1);
    out.tri_index.assign(npix, -1);
    out.bary.assign(3 * npix, 0.0);

    const auto setups = detail::setup_triangles(faces, width, height);
    const int tiles = (height + kTileRows - 1) / kTileRows;
    parallel_for(static_cast<std::size_t>(tiles), [&](std::size_t tile) {
        const int ty0 = static_cast<int>(tile) * kTileRows;
        const int ty1 = std::min(height - 1, ty0 + kTileRows - 1);
        for (const auto& s : setups)
        {
            if (s.y1 < ty0 || s.y0 > ty1)
                continue;
            const auto& mesh = faces[s.face];
            const auto& tri = (*mesh.triangles)[s.tri];
            const Eigen::Vector2d p[3] = {mesh.pixels.row(tri[0]), mesh.pixels.row(tri[1]), mesh.pixels.row(tri[2])};
            const double z[3] = {mesh.depth(tri[0]), mesh.depth(tri[1]), mesh.depth(tri[2])};
            bool owns[3];
            for (int i = 0; i < 3; ++i)
                owns[i] = detail::owns_edge(p[(i + 1) % 3], p[(i + 2) % 3]);
            for (int y = std::max(ty0, s.y0); y <= std::min(ty1, s.y1); ++y)
            {
                const double py = y + 0.5;
                for (int x = s.x0; x <= s.x1; ++x)
                {
                    const double px = x + 0.5;
                    double e[3];
                    bool inside = true;
                    for (int i = 0; i < 3 && inside; ++i)
                    {
                        e[i] = detail::edge_value(p[(i + 1) % 3], p[(i + 2) % 3], px, py);
                        inside = e[i] > 0.0 || (e[i] == 0.0 && owns[i]);
                    }
                    if (!inside)
                        continue;
                    const double q0 = e[0] / z[0], q1 = e[1] / z[1], q2 = e[2] / z[2];
                    const double qsum = q0 + q1 + q2;
                    if (!(qsum > 0.0))
                        continue;
                    const double depth = (e[0] + e[1] + e[2]) / qsum;
                    const std::size_t pix = out.pixel(x, y);
                    const bool closer = depth < out.depth[pix] ||
                                        (depth == out.depth[pix] &&
                                         (s.face < out.face_id[pix] || (s.face == out.face_id[pix] && s.tri < out.tri_index[pix])));
                    if (!closer)
                        continue;
                    out.depth[pix] = depth;
                    out.face_id[pix] = s.face;
                    out.tri_index[pix] = s.tri;
                    out.bary[3 * pix + 0] = q0 / qsum;
                    out.bary[3 * pix + 1] = q1 / qsum;
                    out.bary[3 * pix + 2] = q2 / qsum;
                }
            }
        }
        for (int y = ty0; y <= ty1; ++y)
            for (int x = 0; x < width; ++x)
            {
                const std::size_t pix = out.pixel(x, y);
                if (out.face_id[pix] < 0)
                    continue;
                out.mask.data[pix] = 1;
                const auto& mesh = faces[out.face_id[pix]];
                const auto& tri = (*mesh.triangles)[out.tri_index[pix]];
                for (int c = 0; c < 3; ++c)
                {
                    double v = 0.0;
                    for (int i = 0; i < 3; ++i)
                        v += out.bary[3 * pix + i] * mesh.colors(tri[i], c);
                    out.rgb.at(x, y, c) = v;
                }
            }
    });
    return out;
}

inline RenderOutput rasterize(std::span<const ScreenMesh> faces, const camera::Intrinsics& intr)
{
    return rasterize(faces, intr.width, intr.height);
}

/**
 * Adjoint of rasterize with visibility held fixed: gradients w.r.t. vertex
 * colors (exact adjoint of the barycentric interpolation) and w.r.t. the
 * screen-space positions and depths of the covering triangle's vertices.
 * Occlusion boundaries and silhouettes contribute no position gradient.
 */
inline std::vector<MeshGrad> rasterize_backward(const Image& grad_rgb, const RenderOutput& out,
                                                std::span<const ScreenMesh> faces)
{
    if (grad_rgb.width != out.width || grad_rgb.height != out.height || grad_rgb.channels != 3)
        throw Error(ErrorKind::buffer_mismatch, "gradient image does not match the render buffers");
    const std::size_t npix = static_cast<std::size_t>(out.width) * out.height;
    if (out.face_id.size() != npix || out.bary.size() != 3 * npix)
        throw Error(ErrorKind::buffer_mismatch, "render buffers are inconsistent");
    for (std::size_t pix = 0; pix < npix; ++pix)
    {
        const auto f = out.face_id[pix];
        if (f >= 0 && (static_cast<std::size_t>(f) >= faces.size() ||
                       static_cast<std::size_t>(out.tri_index[pix]) >= faces[f].triangles->size()))
            throw Error(ErrorKind::buffer_mismatch, "render buffers reference a missing triangle");
    }

    // Per-pixel contributions: for each of the 3 vertices, color(3) + position(2) + depth(1).
    constexpr int kStride = 18;
    std::vector<double> contrib(npix * kStride, 0.0);
    const int tiles = (out.height + kTileRows - 1) / kTileRows;
    parallel_for(static_cast<std::size_t>(tiles), [&](std::size_t tile) {
        const int ty0 = static_cast<int>(tile) * kTileRows;
        const int ty1 = std::min(out.height - 1, ty0 + kTileRows - 1);
        for (int y = ty0; y <= ty1; ++y)
            for (int x = 0; x < out.width; ++x)
            {
                const std::size_t pix = out.pixel(x, y);
                if (out.face_id[pix] < 0)
                    continue;
                const Eigen::Vector3d g(grad_rgb.at(x, y, 0), grad_rgb.at(x, y, 1), grad_rgb.at(x, y, 2));
                if (g.isZero(0.0))
                    continue;
                const auto& mesh = faces[out.face_id[pix]];
                const auto& tri = (*mesh.triangles)[out.tri_index[pix]];
                const double px = x + 0.5, py = y + 0.5;
                Eigen::Vector2d p[3];
                double z[3], e[3], b[3], g_b[3];
                for (int i = 0; i < 3; ++i)
                {
                    p[i] = mesh.pixels.row(tri[i]);
                    z[i] = mesh.depth(tri[i]);
                }
                double qsum = 0.0;
                for (int i = 0; i < 3; ++i)
                {
                    e[i] = detail::edge_value(p[(i + 1) % 3], p[(i + 2) % 3], px, py);
                    qsum += e[i] / z[i];
                }
                double gb_dot_b = 0.0;
                for (int i = 0; i < 3; ++i)
                {
                    b[i] = e[i] / z[i] / qsum;
                    const Eigen::Vector3d c = mesh.colors.row(tri[i]);
                    g_b[i] = g.dot(c);
                    gb_dot_b += g_b[i] * b[i];
                }
                double* slot = &contrib[pix * kStride];
                Eigen::Vector2d g_p[3] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
                for (int i = 0; i < 3; ++i)
                {
                    for (int c = 0; c < 3; ++c)
                        slot[6 * i + c] = b[i] * g(c);
                    const double g_q = (g_b[i] - gb_dot_b) / qsum;
                    const double g_e = g_q / z[i];
                    slot[6 * i + 5] = -g_q * e[i] / (z[i] * z[i]);
                    // E_i = -cross(pa - p, pb - p)
                    const int a = (i + 1) % 3, bb = (i + 2) % 3;
                    const Eigen::Vector2d va = p[a] - Eigen::Vector2d(px, py);
                    const Eigen::Vector2d vb = p[bb] - Eigen::Vector2d(px, py);
                    g_p[a] += g_e * Eigen::Vector2d(-vb.y(), vb.x());
                    g_p[bb] += g_e * Eigen::Vector2d(va.y(), -va.x());
                }
                for (int i = 0; i < 3; ++i)
                {
                    slot[6 * i + 3] = g_p[i].x();
                    slot[6 * i + 4] = g_p[i].y();
                }
            }
    });

    std::vector<MeshGrad> grads(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f)
    {
        const auto n = faces[f].pixels.rows();
        grads[f].colors = VertexMatrix::Zero(n, 3);
        grads[f].pixels = Points2::Zero(n, 2);
        grads[f].depth = Eigen::VectorXd::Zero(n);
    }
    for (std::size_t pix = 0; pix < npix; ++pix)
    {
        if (out.face_id[pix] < 0)
            continue;
        const double* slot = &contrib[pix * kStride];
        auto& g = grads[out.face_id[pix]];
        const auto& tri = (*faces[out.face_id[pix]].triangles)[out.tri_index[pix]];
        for (int i = 0; i < 3; ++i)
        {
            for (int c = 0; c < 3; ++c)
                g.colors(tri[i], c) += slot[6 * i + c];
            g.pixels(tri[i], 0) += slot[6 * i + 3];
            g.pixels(tri[i], 1) += slot[6 * i + 4];
            g.depth(tri[i]) += slot[6 * i + 5];
        }
    }
    return grads;
}

/**
 * Covered pixels at least `margin` pixels from every edge of their triangle
 * and whose (2*margin+1)^2 neighborhood shows the same triangle, i.e. away
 * from edges and depth discontinuities.
 */
inline Mask interior_pixels(const RenderOutput& out, std::span<const ScreenMesh> faces, double margin = 2.0)
{
    Mask interior(out.width, out.height);
    const int r = static_cast<int>(std::ceil(margin));
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
        {
            const std::size_t pix = out.pixel(x, y);
            if (out.face_id[pix] < 0)
                continue;
            const auto& mesh = faces[out.face_id[pix]];
            const auto& tri = (*mesh.triangles)[out.tri_index[pix]];
            bool ok = true;
            for (int i = 0; i < 3 && ok; ++i)
            {
                const Eigen::Vector2d pa = mesh.pixels.row(tri[(i + 1) % 3]), pb = mesh.pixels.row(tri[(i + 2) % 3]);
                const double e = detail::edge_value(pa, pb, x + 0.5, y + 0.5);
                ok = e / (pa - pb).norm() >= margin;
            }
            for (int dy = -r; dy <= r && ok; ++dy)
                for (int dx = -r; dx <= r && ok; ++dx)
                {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= out.width || yy >= out.height)
                    {
                        ok = false;
                        break;
                    }
                    const std::size_t q = out.pixel(xx, yy);
                    ok = out.face_id[q] == out.face_id[pix] && out.tri_index[q] == out.tri_index[pix];
                }
            interior.set(x, y, ok);
        }
    return interior;
}

} /* namespace raster */
} /* namespace mf3d */

#endif /* MF3D_RASTER_RASTERIZER_HPP */
