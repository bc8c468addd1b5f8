/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/shading/spherical_harmonics.hpp
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

#ifndef MF3D_SHADING_SPHERICAL_HARMONICS_HPP
#define MF3D_SHADING_SPHERICAL_HARMONICS_HPP

#include "mf3d/core/error.hpp"

#include "Eigen/Core"

#include <cmath>

namespace mf3d {
namespace shading {

/// 9 SH weights per RGB channel (band 0, band 1, band 2).
using SHCoeffs = Eigen::Matrix<double, 9, 3>;
using SHBasis = Eigen::Matrix<double, 9, 1>;

inline constexpr double kY00 = 0.282095;
inline constexpr double kY1 = 0.488603;
inline constexpr double kY2 = 1.092548;
inline constexpr double kY20 = 0.315392;
inline constexpr double kY22 = 0.546274;

/// Neutral light: band-0 weight 1/Y00 per channel, so shading returns the albedo.
inline SHCoeffs neutral_light()
{
    SHCoeffs sh = SHCoeffs::Zero();
    sh.row(0).setConstant(1.0 / kY00);
    return sh;
}

/// Real SH basis without the unit-length check.
inline SHBasis sh_basis_unchecked(const Eigen::Vector3d& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    SHBasis b;
    b << kY00, kY1 * y, kY1 * z, kY1 * x, kY2 * x * y, kY2 * y * z, kY20 * (3.0 * z * z - 1.0), kY2 * x * z,
        kY22 * (x * x - y * y);
    return b;
}

inline SHBasis sh_basis(const Eigen::Vector3d& n)
{
    if (std::abs(n.norm() - 1.0) > 1e-6)
        throw Error(ErrorKind::non_unit_normal, "normal length " + std::to_string(n.norm()));
    return sh_basis_unchecked(n);
}

/// d basis / d normal, a 9x3 Jacobian.
inline Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Eigen::Vector3d& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    Eigen::Matrix<double, 9, 3> j;
    j << 0, 0, 0,                           //
        0, kY1, 0,                          //
        0, 0, kY1,                          //
        kY1, 0, 0,                          //
        kY2 * y, kY2 * x, 0,                //
        0, kY2 * z, kY2 * y,                //
        0, 0, 6.0 * kY20 * z,               //
        kY2 * z, 0, kY2 * x,                //
        2.0 * kY22 * x, -2.0 * kY22 * y, 0; //
    return j;
}

/// Lambertian SH shading: clamp(albedo * (Y(n)^T sh), 0, 1) per channel.
inline Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const Eigen::Vector3d& normal, const SHCoeffs& sh)
{
    const Eigen::Vector3d irradiance = sh.transpose() * sh_basis_unchecked(normal);
    return albedo.cwiseProduct(irradiance).cwiseMax(0.0).cwiseMin(1.0);
}

struct ShadeGrad
{
    Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    SHCoeffs sh = SHCoeffs::Zero();
};

/// Adjoint of shade. Channels clamped to 0 or 1 pass no gradient.
inline ShadeGrad shade_backward(const Eigen::Vector3d& grad_rgb, const Eigen::Vector3d& albedo,
                                const Eigen::Vector3d& normal, const SHCoeffs& sh)
{
    ShadeGrad g;
    const SHBasis y = sh_basis_unchecked(normal);
    const Eigen::Vector3d irradiance = sh.transpose() * y;
    Eigen::Vector3d g_irr = Eigen::Vector3d::Zero();
    for (int c = 0; c < 3; ++c)
    {
        const double v = albedo(c) * irradiance(c);
        if (v <= 0.0 || v >= 1.0)
            continue;
        g.albedo(c) = grad_rgb(c) * irradiance(c);
        g_irr(c) = grad_rgb(c) * albedo(c);
    }
    g.sh = y * g_irr.transpose();
    g.normal = sh_basis_jacobian(normal).transpose() * (sh * g_irr);
    return g;
}

} /* namespace shading */
} /* namespace mf3d */

#endif /* MF3D_SHADING_SPHERICAL_HARMONICS_HPP */
