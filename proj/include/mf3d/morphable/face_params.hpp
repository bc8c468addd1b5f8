/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/morphable/face_params.hpp
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

#ifndef MF3D_MORPHABLE_FACE_PARAMS_HPP
#define MF3D_MORPHABLE_FACE_PARAMS_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/shading/spherical_harmonics.hpp"

#include "Eigen/Core"

namespace mf3d {
namespace morphable {

/**
 * One face's parameter vector: center score, identity / expression / albedo
 * coefficients, pose (rotation + translation code) and 27 SH lighting
 * coefficients; 1 + 80 + 64 + 80 + 6 + 27 = 258 values for the reference
 * layout. The image-plane center lives in pose.face_center but is not part of
 * the free parameters.
 *
 * The same type doubles as the container for parameter gradients.
 */
struct FaceParams
{
    double center_score = 0.0;
    Eigen::VectorXd id;
    Eigen::VectorXd exp;
    Eigen::VectorXd alb;
    camera::Pose pose;
    shading::SHCoeffs illum = shading::SHCoeffs::Zero();

    /// All-zero parameters (including pose) shaped for a bundle.
    static FaceParams zeros_like(const assets::BasisBundle& bundle)
    {
        FaceParams p;
        p.id = Eigen::VectorXd::Zero(bundle.id_basis.cols());
        p.exp = Eigen::VectorXd::Zero(bundle.exp_basis.cols());
        p.alb = Eigen::VectorXd::Zero(bundle.alb_basis.cols());
        p.pose.trans_code.setZero();
        return p;
    }

    /// The mean face under neutral light at depth d_z, anchored at an image-plane center.
    static FaceParams mean_face(const assets::BasisBundle& bundle, double depth, const Eigen::Vector2d& center)
    {
        FaceParams p = zeros_like(bundle);
        p.pose.trans_code = Eigen::Vector3d(0.0, 0.0, depth);
        p.pose.face_center = center;
        p.illum = shading::neutral_light();
        return p;
    }

    Eigen::Index dimension() const { return 1 + id.size() + exp.size() + alb.size() + 6 + 27; }

    /// Flattened as [center_score, id, exp, alb, rot, trans_code, illum (column-major)].
    Eigen::VectorXd to_vector() const
    {
        Eigen::VectorXd v(dimension());
        v << center_score, id, exp, alb, pose.rot, pose.trans_code,
            Eigen::Map<const Eigen::Matrix<double, 27, 1>>(illum.data());
        return v;
    }

    /// Inverse of to_vector; the widths come from this object, face_center is kept.
    void assign(const Eigen::VectorXd& v)
    {
        if (v.size() != dimension())
            throw Error(ErrorKind::dimension_mismatch,
                        "parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                            std::to_string(dimension()));
        Eigen::Index o = 0;
        center_score = v(o++);
        id = v.segment(o, id.size());
        o += id.size();
        exp = v.segment(o, exp.size());
        o += exp.size();
        alb = v.segment(o, alb.size());
        o += alb.size();
        pose.rot = v.segment<3>(o);
        pose.trans_code = v.segment<3>(o + 3);
        o += 6;
        Eigen::Map<Eigen::Matrix<double, 27, 1>>(illum.data()) = v.segment<27>(o);
    }

    FaceParams& operator+=(const FaceParams& other)
    {
        assign(to_vector() + other.to_vector());
        return *this;
    }
};

inline void check_dimensions(const FaceParams& p, const assets::BasisBundle& bundle)
{
    if (p.id.size() != bundle.id_basis.cols() || p.exp.size() != bundle.exp_basis.cols() ||
        p.alb.size() != bundle.alb_basis.cols())
        throw Error(ErrorKind::dimension_mismatch,
                    "coefficient widths " + std::to_string(p.id.size()) + "/" + std::to_string(p.exp.size()) + "/" +
                        std::to_string(p.alb.size()) + " do not match bundle " +
                        std::to_string(bundle.id_basis.cols()) + "/" + std::to_string(bundle.exp_basis.cols()) + "/" +
                        std::to_string(bundle.alb_basis.cols()));
}

} /* namespace morphable */
} /* namespace mf3d */

#endif /* MF3D_MORPHABLE_FACE_PARAMS_HPP */
