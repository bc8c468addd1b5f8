/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/camera/camera.hpp
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

#ifndef MF3D_CAMERA_CAMERA_HPP
#define MF3D_CAMERA_CAMERA_HPP

#include "mf3d/core/error.hpp"
#include "mf3d/core/types.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace mf3d {
namespace camera {

/// Focal length used for a 224 px frame; other frame sizes scale it linearly.
inline constexpr double kDefaultFocalAt224 = 1015.0;

/// Projections with camera-space depth at or below this are rejected.
inline constexpr double kMinDepth = 1e-6;

/**
 * The single pinhole camera shared by all faces of an image. Pixel (i, j)
 * samples the continuous image coordinate (i + 0.5, j + 0.5).
 */
struct Intrinsics
{
    double focal = 0.0;
    int width = 0;
    int height = 0;

    /// Frame-proportional default focal length (1015 px per 224 px of width).
    static Intrinsics with_default_focal(int width, int height)
    {
        return {kDefaultFocalAt224 * width / 224.0, width, height};
    }
};

inline void validate(const Intrinsics& intr)
{
    if (!(intr.focal > 0.0) || !std::isfinite(intr.focal))
        throw Error(ErrorKind::invariant_violation, "focal length must be positive");
    if (intr.width <= 0 || intr.height <= 0 || intr.width % 32 != 0 || intr.height % 32 != 0)
        throw Error(ErrorKind::invariant_violation,
                    "image size " + std::to_string(intr.width) + "x" + std::to_string(intr.height) +
                        " must be positive multiples of 32");
}

/**
 * Rigid pose of one face: axis-angle rotation, the translation code
 * (d_x, d_y, d_z) and the face's image-plane center (c_x, c_y).
 */
struct Pose
{
    Eigen::Vector3d rot = Eigen::Vector3d::Zero();
    Eigen::Vector3d trans_code = Eigen::Vector3d(0.0, 0.0, 1.0);
    Eigen::Vector2d face_center = Eigen::Vector2d::Zero();
};

inline Eigen::Matrix3d intrinsic_matrix(const Intrinsics& intr)
{
    Eigen::Matrix3d k;
    k << intr.focal, 0.0, intr.width / 2.0, 0.0, intr.focal, intr.height / 2.0, 0.0, 0.0, 1.0;
    return k;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d s;
    s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return s;
}

/// Exponential map so(3) -> SO(3) (Rodrigues), first-order Taylor below |rot| < 1e-8.
inline Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& rot)
{
    const double theta = rot.norm();
    if (theta < 1e-8)
        return Eigen::Matrix3d::Identity() + skew(rot);
    const Eigen::Matrix3d k = skew(rot / theta);
    return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

/**
 * Partial derivatives dR/drot_i of the exponential map, using the closed form
 * dR/dv_i = (v_i [v]x + [v x (I - R) e_i]x) R / |v|^2, and the generators
 * [e_i]x near the origin.
 */
inline std::array<Eigen::Matrix3d, 3> rotation_jacobian(const Eigen::Vector3d& rot)
{
    std::array<Eigen::Matrix3d, 3> d;
    const double theta2 = rot.squaredNorm();
    if (theta2 < 1e-16)
    {
        for (int i = 0; i < 3; ++i)
            d[i] = skew(Eigen::Vector3d::Unit(i));
        return d;
    }
    const Eigen::Matrix3d r = rotation_from_axis_angle(rot);
    const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - r;
    const Eigen::Matrix3d vx = skew(rot);
    for (int i = 0; i < 3; ++i)
    {
        const Eigen::Vector3d col = rot.cross(i_minus_r.col(i));
        d[i] = (rot(i) * vx + skew(col)) * r / theta2;
    }
    return d;
}

/// Geodesic distance between two rotations in radians.
inline double geodesic_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b)
{
    const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

/// Camera-space translation t decoded from (d, c) relative to the principal point.
inline Eigen::Vector3d decode_translation(const Pose& pose, const Intrinsics& intr)
{
    const auto& d = pose.trans_code;
    if (!(d.z() > 0.0))
        throw Error(ErrorKind::nonpositive_depth, "translation depth d_z must be positive");
    return {d.z() * (d.x() + pose.face_center.x() - intr.width / 2.0) / intr.focal,
            d.z() * (d.y() + pose.face_center.y() - intr.height / 2.0) / intr.focal, d.z()};
}

/// Jacobian dt/d(d_x, d_y, d_z); column j is the derivative w.r.t. trans_code(j).
inline Eigen::Matrix3d translation_jacobian(const Pose& pose, const Intrinsics& intr)
{
    const auto& d = pose.trans_code;
    Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
    j(0, 0) = d.z() / intr.focal;
    j(1, 1) = d.z() / intr.focal;
    j(0, 2) = (d.x() + pose.face_center.x() - intr.width / 2.0) / intr.focal;
    j(1, 2) = (d.y() + pose.face_center.y() - intr.height / 2.0) / intr.focal;
    j(2, 2) = 1.0;
    return j;
}

/// Pixel coordinates (u, v) and camera-space depth of projected points.
struct Projection
{
    Points2 pixels;
    Eigen::VectorXd depth;
};

/// Perspective projection of points already in camera space.
inline Projection project_camera_points(const VertexMatrix& cam, const Intrinsics& intr)
{
    Projection out{Points2(cam.rows(), 2), Eigen::VectorXd(cam.rows())};
    const double cx = intr.width / 2.0;
    const double cy = intr.height / 2.0;
    for (Eigen::Index i = 0; i < cam.rows(); ++i)
    {
        const double z = cam(i, 2);
        if (!(z > kMinDepth))
            throw Error(ErrorKind::behind_camera, "point " + std::to_string(i) + " has camera depth " + std::to_string(z));
        out.pixels(i, 0) = intr.focal * cam(i, 0) / z + cx;
        out.pixels(i, 1) = intr.focal * cam(i, 1) / z + cy;
        out.depth(i) = z;
    }
    return out;
}

/// Rigid transform R X + t of model-space points.
inline VertexMatrix to_camera(const VertexMatrix& points, const Pose& pose, const Intrinsics& intr)
{
    const Eigen::Matrix3d r = rotation_from_axis_angle(pose.rot);
    const Eigen::Vector3d t = decode_translation(pose, intr);
    VertexMatrix cam = points * r.transpose();
    cam.rowwise() += t.transpose();
    return cam;
}

/// p ~ K (R X + t): model-space points to pixels plus camera depth.
inline Projection project(const VertexMatrix& points, const Pose& pose, const Intrinsics& intr)
{
    return project_camera_points(to_camera(points, pose, intr), intr);
}

/// Inverse of project for known camera depth.
inline VertexMatrix unproject(const Points2& pixels, const Eigen::VectorXd& depth, const Pose& pose,
                              const Intrinsics& intr)
{
    const Eigen::Matrix3d r = rotation_from_axis_angle(pose.rot);
    const Eigen::Vector3d t = decode_translation(pose, intr);
    VertexMatrix out(pixels.rows(), 3);
    for (Eigen::Index i = 0; i < pixels.rows(); ++i)
    {
        const Eigen::Vector3d cam((pixels(i, 0) - intr.width / 2.0) * depth(i) / intr.focal,
                                  (pixels(i, 1) - intr.height / 2.0) * depth(i) / intr.focal, depth(i));
        out.row(i) = (r.transpose() * (cam - t)).transpose();
    }
    return out;
}

/**
 * Adjoint of project_camera_points: maps gradients w.r.t. (u, v) and depth to
 * gradients w.r.t. camera-space coordinates.
 */
inline VertexMatrix project_backward(const VertexMatrix& cam, const Points2& grad_pixels,
                                     const Eigen::VectorXd& grad_depth, const Intrinsics& intr)
{
    VertexMatrix g(cam.rows(), 3);
    for (Eigen::Index i = 0; i < cam.rows(); ++i)
    {
        const double z = cam(i, 2);
        const double fz = intr.focal / z;
        const double gu = grad_pixels(i, 0);
        const double gv = grad_pixels(i, 1);
        g(i, 0) = gu * fz;
        g(i, 1) = gv * fz;
        g(i, 2) = -(gu * cam(i, 0) + gv * cam(i, 1)) * fz / z + grad_depth(i);
    }
    return g;
}

} /* namespace camera */
} /* namespace mf3d */

#endif /* MF3D_CAMERA_CAMERA_HPP */
