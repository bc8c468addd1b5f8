/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/morphable/decode.hpp
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

#ifndef MF3D_MORPHABLE_DECODE_HPP
#define MF3D_MORPHABLE_DECODE_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/morphable/face_params.hpp"

#include "Eigen/Core"

#include <fstream>
#include <string>
#include <vector>

namespace mf3d {
namespace morphable {

/**
 * A decoded face. shape_cam = R * shape_model + t; normals are unit-length,
 * area-weighted vertex normals in camera space. albedo_raw keeps the pre-clamp
 * values so the backward pass can apply the clamp subgradient.
 */
struct DecodedFace
{
    VertexMatrix shape_model;
    VertexMatrix shape_cam;
    VertexMatrix albedo;
    VertexMatrix albedo_raw;
    VertexMatrix normals;
    Eigen::Matrix3d rotation;
    Eigen::Vector3d translation;
};

/// Gradients w.r.t. the fields of a DecodedFace. Empty matrices count as zero.
struct DecodedFaceGrad
{
    VertexMatrix shape_model;
    VertexMatrix shape_cam;
    VertexMatrix albedo;
    VertexMatrix normals;
};

/// Area-weighted vertex normals: normalized sums of the incident (b-a)x(c-a).
inline VertexMatrix vertex_normals(const VertexMatrix& v, const std::vector<Triangle>& triangles)
{
    VertexMatrix sum = VertexMatrix::Zero(v.rows(), 3);
    for (const auto& t : triangles)
    {
        const Eigen::RowVector3d a = v.row(t[0]), b = v.row(t[1]), c = v.row(t[2]);
        const Eigen::RowVector3d n = (b - a).cross(c - a);
        sum.row(t[0]) += n;
        sum.row(t[1]) += n;
        sum.row(t[2]) += n;
    }
    for (Eigen::Index i = 0; i < sum.rows(); ++i)
    {
        const double len = sum.row(i).norm();
        if (len > 0.0)
            sum.row(i) /= len;
        else
            sum.row(i) = Eigen::RowVector3d(0.0, 0.0, -1.0);
    }
    return sum;
}

/// Adjoint of vertex_normals: gradient w.r.t. the vertex positions.
inline VertexMatrix vertex_normals_backward(const VertexMatrix& v, const std::vector<Triangle>& triangles,
                                            const VertexMatrix& grad_normals)
{
    VertexMatrix sum = VertexMatrix::Zero(v.rows(), 3);
    for (const auto& t : triangles)
    {
        const Eigen::RowVector3d a = v.row(t[0]), b = v.row(t[1]), c = v.row(t[2]);
        const Eigen::RowVector3d n = (b - a).cross(c - a);
        sum.row(t[0]) += n;
        sum.row(t[1]) += n;
        sum.row(t[2]) += n;
    }
    // d(m/|m|) = (I - n n^T) dm / |m|
    VertexMatrix g_sum(v.rows(), 3);
    for (Eigen::Index i = 0; i < v.rows(); ++i)
    {
        const double len = sum.row(i).norm();
        if (len <= 0.0)
        {
            g_sum.row(i).setZero();
            continue;
        }
        const Eigen::RowVector3d n = sum.row(i) / len;
        const Eigen::RowVector3d g = grad_normals.row(i);
        g_sum.row(i) = (g - n * n.dot(g)) / len;
    }
    VertexMatrix grad = VertexMatrix::Zero(v.rows(), 3);
    for (const auto& t : triangles)
    {
        const Eigen::RowVector3d a = v.row(t[0]), b = v.row(t[1]), c = v.row(t[2]);
        const Eigen::RowVector3d g = g_sum.row(t[0]) + g_sum.row(t[1]) + g_sum.row(t[2]);
        const Eigen::RowVector3d e1 = b - a, e2 = c - a;
        const Eigen::RowVector3d g_e1 = e2.cross(g);
        const Eigen::RowVector3d g_e2 = g.cross(e1);
        grad.row(t[1]) += g_e1;
        grad.row(t[2]) += g_e2;
        grad.row(t[0]) -= g_e1 + g_e2;
    }
    return grad;
}

/// S = mean + id_basis * id + exp_basis * exp, as an N x 3 vertex matrix.
inline VertexMatrix decode_shape(const FaceParams& params, const assets::BasisBundle& bundle)
{
    const Eigen::VectorXd s = bundle.mean_shape + bundle.id_basis * params.id + bundle.exp_basis * params.exp;
    return assets::as_vertices(s);
}

/// Shape, clamped albedo, rigid transform and camera-space normals of one face.
inline DecodedFace decode(const FaceParams& params, const assets::BasisBundle& bundle,
                          const camera::Intrinsics& intr)
{
    check_dimensions(params, bundle);
    DecodedFace face;
    face.shape_model = decode_shape(params, bundle);
    face.albedo_raw = assets::as_vertices(bundle.mean_albedo + bundle.alb_basis * params.alb);
    face.albedo = face.albedo_raw.cwiseMax(0.0).cwiseMin(1.0);
    face.rotation = camera::rotation_from_axis_angle(params.pose.rot);
    face.translation = camera::decode_translation(params.pose, intr);
    face.shape_cam = face.shape_model * face.rotation.transpose();
    face.shape_cam.rowwise() += face.translation.transpose();
    face.normals = vertex_normals(face.shape_cam, bundle.triangles);
    return face;
}

/**
 * Exact adjoint of decode. Returns gradients w.r.t. id, exp, alb, rot and
 * trans_code; center_score, illum and face_center receive zero.
 */
inline FaceParams decode_backward(const DecodedFaceGrad& grad, const FaceParams& params,
                                  const assets::BasisBundle& bundle, const camera::Intrinsics& intr,
                                  const DecodedFace& face)
{
    const Eigen::Index n = bundle.vertex_count();
    FaceParams out = FaceParams::zeros_like(bundle);
    out.pose.face_center = params.pose.face_center;

    VertexMatrix g_cam = grad.shape_cam.size() ? grad.shape_cam : VertexMatrix::Zero(n, 3);
    if (grad.normals.size())
        g_cam += vertex_normals_backward(face.shape_cam, bundle.triangles, grad.normals);

    VertexMatrix g_model = g_cam * face.rotation;
    if (grad.shape_model.size())
        g_model += grad.shape_model;

    const Eigen::Matrix3d m = g_cam.transpose() * face.shape_model;
    const auto d_rot = camera::rotation_jacobian(params.pose.rot);
    for (int i = 0; i < 3; ++i)
        out.pose.rot(i) = d_rot[i].cwiseProduct(m).sum();
    const Eigen::Vector3d g_t = g_cam.colwise().sum().transpose();
    out.pose.trans_code = camera::translation_jacobian(params.pose, intr).transpose() * g_t;

    const Eigen::VectorXd g_s = assets::as_planar(g_model);
    out.id = bundle.id_basis.transpose() * g_s;
    out.exp = bundle.exp_basis.transpose() * g_s;

    if (grad.albedo.size())
    {
        VertexMatrix g_a = grad.albedo;
        for (Eigen::Index i = 0; i < g_a.size(); ++i)
        {
            const double raw = face.albedo_raw.data()[i];
            if (raw < 0.0 || raw > 1.0)
                g_a.data()[i] = 0.0;
        }
        out.alb = bundle.alb_basis.transpose() * assets::as_planar(g_a);
    }
    return out;
}

inline FaceParams decode_backward(const DecodedFaceGrad& grad, const FaceParams& params,
                                  const assets::BasisBundle& bundle, const camera::Intrinsics& intr)
{
    return decode_backward(grad, params, bundle, intr, decode(params, bundle, intr));
}

/// Pixel positions of the 68 landmark vertices.
inline Points2 project_landmarks(const DecodedFace& face, const assets::BasisBundle& bundle,
                                 const camera::Intrinsics& intr)
{
    VertexMatrix pts(kNumLandmarks, 3);
    for (int j = 0; j < kNumLandmarks; ++j)
        pts.row(j) = face.shape_cam.row(bundle.landmark_indices[j]);
    return camera::project_camera_points(pts, intr).pixels;
}

inline Points2 project_landmarks(const DecodedFace& face, const assets::BasisBundle& bundle,
                                 const camera::Pose& pose, const camera::Intrinsics& intr)
{
    VertexMatrix pts(kNumLandmarks, 3);
    for (int j = 0; j < kNumLandmarks; ++j)
        pts.row(j) = face.shape_model.row(bundle.landmark_indices[j]);
    return camera::project(pts, pose, intr).pixels;
}

/// Wavefront OBJ with per-vertex color ("v x y z r g b") and 1-based faces.
inline void write_obj(const std::string& path, const VertexMatrix& vertices, const VertexMatrix& colors,
                      const std::vector<Triangle>& triangles)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    out.precision(9);
    for (Eigen::Index i = 0; i < vertices.rows(); ++i)
        out << "v " << vertices(i, 0) << ' ' << vertices(i, 1) << ' ' << vertices(i, 2) << ' ' << colors(i, 0) << ' '
            << colors(i, 1) << ' ' << colors(i, 2) << '\n';
    for (const auto& t : triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out)
        throw Error(ErrorKind::io_failure, "write failed for '" + path + "'");
}

} /* namespace morphable */
} /* namespace mf3d */

#endif /* MF3D_MORPHABLE_DECODE_HPP */
