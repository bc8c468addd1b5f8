/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/assets/synth_bundle.hpp
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

#ifndef MF3D_ASSETS_SYNTH_BUNDLE_HPP
#define MF3D_ASSETS_SYNTH_BUNDLE_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/assets/convex_hull.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"
#include "Eigen/QR"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace mf3d {
namespace assets {

/**
 * Approximate 68-point layout in a normalized face frame: x in [-1, 1] from
 * image-left to image-right, y in [-1, 1] from forehead to chin.
 */
inline std::array<Eigen::Vector2d, kNumLandmarks> landmark_template()
{
    using std::numbers::pi;
    std::array<Eigen::Vector2d, kNumLandmarks> lm;
    for (int i = 0; i <= 16; ++i) // jaw
    {
        const double t = i / 16.0;
        lm[i] = {-0.95 * std::cos(pi * t), -0.25 + 1.05 * std::sin(pi * t)};
    }
    for (int i = 0; i < 5; ++i) // brows
    {
        const double s = i / 4.0;
        lm[17 + i] = {-0.75 + 0.6 * s, -0.55 - 0.08 * std::sin(pi * s)};
        lm[22 + i] = {0.15 + 0.6 * s, -0.55 - 0.08 * std::sin(pi * s)};
    }
    for (int i = 0; i < 4; ++i) // nose bridge
        lm[27 + i] = {0.0, -0.35 + 0.15 * i};
    for (int i = 0; i < 5; ++i) // nostrils
        lm[31 + i] = {-0.2 + 0.1 * i, 0.2 + 0.03 * (i == 2)};
    const double eye_angles[6] = {pi, 0.75 * pi, 0.25 * pi, 0.0, -0.25 * pi, -0.75 * pi};
    for (int i = 0; i < 6; ++i) // left eye: outer corner, upper lid, inner corner, lower lid
        lm[36 + i] = {-0.42 + 0.17 * std::cos(eye_angles[i]), -0.3 - 0.07 * std::sin(eye_angles[i])};
    const double right_eye_angles[6] = {pi, 0.75 * pi, 0.25 * pi, 0.0, -0.25 * pi, -0.75 * pi};
    for (int i = 0; i < 6; ++i) // right eye: inner corner first
        lm[42 + i] = {0.42 + 0.17 * std::cos(right_eye_angles[i]), -0.3 - 0.07 * std::sin(right_eye_angles[i])};
    for (int i = 0; i < 12; ++i) // outer lips, clockwise from the left corner
    {
        const double a = pi - 2.0 * pi * i / 12.0;
        lm[48 + i] = {0.38 * std::cos(a), 0.5 - 0.15 * std::sin(a)};
    }
    for (int i = 0; i < 8; ++i) // inner lips
    {
        const double a = pi - 2.0 * pi * i / 8.0;
        lm[60 + i] = {0.28 * std::cos(a), 0.5 - 0.06 * std::sin(a)};
    }
    return lm;
}

/// True for nose (27-35) and mouth (48-67) landmarks.
inline std::vector<bool> default_mouthnose_mask()
{
    std::vector<bool> mask(kNumLandmarks, false);
    for (int i = 27; i <= 35; ++i)
        mask[i] = true;
    for (int i = 48; i < kNumLandmarks; ++i)
        mask[i] = true;
    return mask;
}

namespace detail {

// Faces look toward -z in model space; y points down, matching the camera frame.
inline Eigen::Vector3d face_direction(const Eigen::Vector2d& xy)
{
    return Eigen::Vector3d(1.2 * xy.x(), 1.1 * xy.y(), -1.0).normalized();
}

inline Eigen::Vector2d face_coords(const Eigen::Vector3d& dir)
{
    if (dir.z() >= -1e-9)
        return {1e9, 1e9};
    return {dir.x() / (-dir.z() * 1.2), dir.y() / (-dir.z() * 1.1)};
}

inline double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

template <typename Derived>
void round_to_float(Eigen::MatrixBase<Derived>& m)
{
    m = m.unaryExpr([](double v) { return round_to_float(v); });
}

/// Random Fourier features cos(w . d + phi) of vertex directions, one per coordinate block.
inline Eigen::MatrixXd smooth_fields(const VertexMatrix& dirs, int count, double bandwidth, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, bandwidth);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const Eigen::Index n = dirs.rows();
    Eigen::MatrixXd f(3 * n, count);
    for (int k = 0; k < count; ++k)
        for (int c = 0; c < 3; ++c)
        {
            const Eigen::Vector3d w(normal(rng), normal(rng), normal(rng));
            const double phi = phase(rng);
            for (Eigen::Index v = 0; v < n; ++v)
                f(c * n + v, k) = std::cos(w.dot(dirs.row(v).transpose()) + phi);
        }
    return f;
}

/// Thin orthonormal basis of the leading columns of m; columns past the rank limit are zero.
inline Eigen::MatrixXd leading_orthonormal(const Eigen::MatrixXd& m)
{
    const Eigen::Index rows = m.rows();
    const Eigen::Index usable = std::min(rows, m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.leftCols(usable));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, usable);
    // Fix the sign so each column correlates positively with its source column.
    for (Eigen::Index j = 0; j < usable; ++j)
        if (q.col(j).dot(m.col(j)) < 0.0)
            q.col(j) *= -1.0;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, m.cols());
    out.leftCols(usable) = q;
    return out;
}

inline Eigen::VectorXd mode_scales(int count, double rms_per_vertex, Eigen::Index n_vertices)
{
    Eigen::VectorXd w(count);
    for (int k = 0; k < count; ++k)
        w(k) = 1.0 / std::sqrt(1.0 + k / 8.0);
    return w * (rms_per_vertex * std::sqrt(static_cast<double>(n_vertices)) / w.norm());
}

} /* namespace detail */

/// Per-vertex RMS displacement (model units) of a unit-variance identity draw.
inline constexpr double kSynthIdentityRms = 0.05;
inline constexpr double kSynthExpressionRms = 0.035;
/// Per-vertex RMS color change of a unit-variance albedo draw.
inline constexpr double kSynthAlbedoRms = 0.05;

/**
 * Generates a deterministic head-like morphable model with n_vertices
 * vertices: a closed, star-shaped mesh (roughly unit radius, facing -z) with a
 * nose bump, smooth orthogonal shape and albedo bases, 68 landmarks laid out
 * on the front and a cheek/nose/forehead skin region.
 *
 * Identity and expression columns are mutually orthogonal and orthogonal to
 * the similarity motions (translation, rotation, scale) of the mean shape, so
 * pose and depth stay identifiable from the bases. When 3N is too small to
 * hold all modes, the trailing columns are zero. All values are rounded to
 * float32 so the bundle survives an MF3D round trip unchanged.
 */
inline BasisBundle synth_bundle(std::uint64_t seed, int n_vertices)
{
    if (n_vertices < 4)
        throw Error(ErrorKind::invalid_argument, "synth_bundle needs at least 4 vertices");
    using std::numbers::pi;
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 0x51ed27u);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const Eigen::Index n = n_vertices;

    // Jittered Fibonacci sphere in spiral order.
    VertexMatrix dirs(n, 3);
    const double golden = pi * (3.0 - std::sqrt(5.0));
    const double phase = pi * uni(rng);
    const double jitter = 0.15 * std::sqrt(4.0 * pi / n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i + phase;
        Eigen::Vector3d d(r * std::cos(phi), z, r * std::sin(phi)); // spiral pole on +y
        d += jitter * Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        dirs.row(i) = d.normalized().transpose();
    }

    BasisBundle b;
    b.triangles = convex_hull_triangles(dirs);

    // Star-shaped head: ellipsoid with a nose and a chin bump.
    const Eigen::Vector3d radii(0.85 * (1.0 + 0.05 * uni(rng)), 1.0 * (1.0 + 0.05 * uni(rng)),
                                0.95 * (1.0 + 0.05 * uni(rng)));
    const Eigen::Vector3d nose = detail::face_direction({0.0, 0.05});
    const Eigen::Vector3d chin = detail::face_direction({0.0, 0.85});
    VertexMatrix shape(n, 3);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const Eigen::Vector3d d = dirs.row(i).transpose();
        const double bump = 0.16 * std::exp(-(d - nose).squaredNorm() / (2.0 * 0.14 * 0.14)) +
                            0.05 * std::exp(-(d - chin).squaredNorm() / (2.0 * 0.2 * 0.2));
        shape.row(i) = (radii.cwiseProduct(d) * (1.0 + bump)).transpose();
    }

    // Landmarks: nearest unused vertex to each template direction.
    const auto tmpl = landmark_template();
    std::vector<std::uint8_t> used(n, 0);
    for (int j = 0; j < kNumLandmarks; ++j)
    {
        const Eigen::Vector3d target = detail::face_direction(tmpl[j]);
        const bool allow_reuse = n < kNumLandmarks;
        Eigen::Index best = -1;
        double best_dot = -2.0;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            if (used[i] && !allow_reuse)
                continue;
            const double d = dirs.row(i).dot(target.transpose());
            if (d > best_dot)
            {
                best_dot = d;
                best = i;
            }
        }
        used[best] = 1;
        b.landmark_indices.push_back(static_cast<std::uint32_t>(best));
    }
    b.mouthnose_mask = default_mouthnose_mask();

    // Skin: front cap minus eyes and mouth.
    Eigen::Index front_most = 0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (dirs(i, 2) < dirs(front_most, 2))
            front_most = i;
        const Eigen::Vector2d xy = detail::face_coords(dirs.row(i).transpose());
        if (xy.norm() > 0.9 || xy.y() > 0.75)
            continue;
        const bool eye = std::pow((std::abs(xy.x()) - 0.42) / 0.25, 2) + std::pow((xy.y() + 0.3) / 0.14, 2) < 1.0;
        const bool mouth = std::pow(xy.x() / 0.48, 2) + std::pow((xy.y() - 0.5) / 0.22, 2) < 1.0;
        if (!eye && !mouth)
            b.skin_region.push_back(static_cast<std::uint32_t>(i));
    }
    if (b.skin_region.empty())
        b.skin_region.push_back(static_cast<std::uint32_t>(front_most));

    // Put the model origin at the landmark centroid.
    Eigen::RowVector3d centroid = Eigen::RowVector3d::Zero();
    for (auto idx : b.landmark_indices)
        centroid += shape.row(idx) / kNumLandmarks;
    shape.rowwise() -= centroid;
    b.mean_shape = as_planar(shape);

    // Shape bases, orthogonal to the similarity tangent space of the mean.
    Eigen::MatrixXd tangent(3 * n, 7);
    tangent.setZero();
    for (Eigen::Index v = 0; v < n; ++v)
    {
        const Eigen::Vector3d x = shape.row(v).transpose();
        for (int c = 0; c < 3; ++c)
        {
            tangent(c * n + v, c) = 1.0;
            const Eigen::Vector3d w = Eigen::Vector3d::Unit(c).cross(x);
            for (int k = 0; k < 3; ++k)
                tangent(k * n + v, 3 + c) = w(k);
            tangent(c * n + v, 6) = x(c);
        }
    }
    Eigen::MatrixXd stacked(3 * n, 7 + kIdentityModes + kExpressionModes);
    stacked << tangent, detail::smooth_fields(dirs, kIdentityModes + kExpressionModes, 2.0, rng);
    const Eigen::MatrixXd q = detail::leading_orthonormal(stacked);
    const Eigen::VectorXd id_scale = detail::mode_scales(kIdentityModes, kSynthIdentityRms, n);
    const Eigen::VectorXd exp_scale = detail::mode_scales(kExpressionModes, kSynthExpressionRms, n);
    b.id_basis = q.middleCols(7, kIdentityModes) * id_scale.asDiagonal();
    b.exp_basis = q.middleCols(7 + kIdentityModes, kExpressionModes) * exp_scale.asDiagonal();

    // Albedo: skin tone with smooth variation and a smooth orthogonal basis.
    const Eigen::Vector3d tone(0.74 + 0.04 * uni(rng), 0.55 + 0.04 * uni(rng), 0.45 + 0.04 * uni(rng));
    const Eigen::MatrixXd variation = detail::smooth_fields(dirs, 1, 1.5, rng);
    b.mean_albedo.resize(3 * n);
    for (int c = 0; c < 3; ++c)
        for (Eigen::Index v = 0; v < n; ++v)
            b.mean_albedo(c * n + v) = std::clamp(tone(c) + 0.06 * variation(c * n + v, 0), 0.02, 0.98);
    const Eigen::MatrixXd alb_q = detail::leading_orthonormal(detail::smooth_fields(dirs, kAlbedoModes, 2.0, rng));
    b.alb_basis = alb_q * detail::mode_scales(kAlbedoModes, kSynthAlbedoRms, n).asDiagonal();

    detail::round_to_float(b.mean_shape);
    detail::round_to_float(b.mean_albedo);
    detail::round_to_float(b.id_basis);
    detail::round_to_float(b.exp_basis);
    detail::round_to_float(b.alb_basis);
    validate(b);
    return b;
}

} /* namespace assets */
} /* namespace mf3d */

#endif /* MF3D_ASSETS_SYNTH_BUNDLE_HPP */
