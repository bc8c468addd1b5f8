/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/assets/bundle.hpp
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

#ifndef MF3D_ASSETS_BUNDLE_HPP
#define MF3D_ASSETS_BUNDLE_HPP

#include "mf3d/core/error.hpp"
#include "mf3d/core/types.hpp"

#include "Eigen/Core"

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

namespace mf3d {
namespace assets {

/// Identity, expression and albedo mode counts of the reference model layout.
inline constexpr int kIdentityModes = 80;
inline constexpr int kExpressionModes = 64;
inline constexpr int kAlbedoModes = 80;

/**
 * The morphable-model asset: mean shape and albedo, the three linear bases,
 * the mesh topology and the landmark / skin-region index sets.
 *
 * All per-vertex vectors are planar (all x, all y, all z; or all r, g, b).
 * Basis columns are stored pre-multiplied by their mode standard deviation, so
 * the coefficients are unit-variance.
 *
 * A bundle is immutable after construction and can be shared between threads.
 */
struct BasisBundle
{
    Eigen::VectorXd mean_shape;  ///< 3N
    Eigen::VectorXd mean_albedo; ///< 3N, in [0, 1]
    Eigen::MatrixXd id_basis;    ///< 3N x 80
    Eigen::MatrixXd exp_basis;   ///< 3N x 64
    Eigen::MatrixXd alb_basis;   ///< 3N x 80
    std::vector<Triangle> triangles;
    std::vector<std::uint32_t> landmark_indices; ///< 68 entries
    std::vector<bool> mouthnose_mask;            ///< 68 entries
    std::vector<std::uint32_t> skin_region;

    Eigen::Index vertex_count() const { return mean_shape.size() / 3; }

    bool operator==(const BasisBundle& other) const
    {
        return mean_shape == other.mean_shape && mean_albedo == other.mean_albedo && id_basis == other.id_basis &&
               exp_basis == other.exp_basis && alb_basis == other.alb_basis && triangles == other.triangles &&
               landmark_indices == other.landmark_indices && mouthnose_mask == other.mouthnose_mask &&
               skin_region == other.skin_region;
    }
};

/// View of a planar 3N vector as an N x 3 vertex matrix.
inline VertexMatrix as_vertices(const Eigen::VectorXd& planar)
{
    return Eigen::Map<const VertexMatrix>(planar.data(), planar.size() / 3, 3);
}

inline Eigen::VectorXd as_planar(const VertexMatrix& vertices)
{
    return Eigen::Map<const Eigen::VectorXd>(vertices.data(), vertices.size());
}

/**
 * Checks every bundle invariant and throws invariant_violation naming the
 * first failing field.
 *
 * Landmark indices must be pairwise distinct whenever the mesh has at least 68
 * vertices; smaller toy meshes cannot satisfy that and may repeat indices.
 */
inline void validate(const BasisBundle& b)
{
    auto fail = [](const std::string& field, const std::string& why) {
        throw Error(ErrorKind::invariant_violation, field + ": " + why);
    };
    if (b.mean_shape.size() == 0 || b.mean_shape.size() % 3 != 0)
        fail("mean_shape", "length must be a positive multiple of 3");
    const Eigen::Index n3 = b.mean_shape.size();
    const auto n = static_cast<std::uint64_t>(n3 / 3);
    if (b.mean_albedo.size() != n3)
        fail("mean_albedo", "length differs from mean_shape");
    if (b.id_basis.rows() != n3)
        fail("id_basis", "row count differs from 3N");
    if (b.exp_basis.rows() != n3)
        fail("exp_basis", "row count differs from 3N");
    if (b.alb_basis.rows() != n3)
        fail("alb_basis", "row count differs from 3N");
    if (!b.mean_shape.allFinite())
        fail("mean_shape", "non-finite value");
    if (!b.id_basis.allFinite())
        fail("id_basis", "non-finite value");
    if (!b.exp_basis.allFinite())
        fail("exp_basis", "non-finite value");
    if (!b.alb_basis.allFinite())
        fail("alb_basis", "non-finite value");
    for (Eigen::Index i = 0; i < n3; ++i)
        if (!(b.mean_albedo(i) >= 0.0 && b.mean_albedo(i) <= 1.0))
            fail("mean_albedo", "entry " + std::to_string(i) + " outside [0,1]");
    if (b.triangles.empty())
        fail("triangles", "mesh has no triangles");
    for (std::size_t t = 0; t < b.triangles.size(); ++t)
        for (auto v : b.triangles[t])
            if (v >= n)
                fail("triangles", "triangle " + std::to_string(t) + " references vertex " + std::to_string(v) +
                                      " >= N=" + std::to_string(n));
    if (b.landmark_indices.size() != kNumLandmarks)
        fail("landmark_indices", "expected 68 entries, got " + std::to_string(b.landmark_indices.size()));
    for (auto v : b.landmark_indices)
        if (v >= n)
            fail("landmark_indices", "index " + std::to_string(v) + " >= N");
    if (n >= kNumLandmarks)
    {
        std::unordered_set<std::uint32_t> seen(b.landmark_indices.begin(), b.landmark_indices.end());
        if (seen.size() != b.landmark_indices.size())
            fail("landmark_indices", "entries are not distinct");
    }
    if (b.mouthnose_mask.size() != kNumLandmarks)
        fail("mouthnose_mask", "expected 68 entries");
    for (auto v : b.skin_region)
        if (v >= n)
            fail("skin_region", "index " + std::to_string(v) + " >= N");
}

} /* namespace assets */
} /* namespace mf3d */

#endif /* MF3D_ASSETS_BUNDLE_HPP */
