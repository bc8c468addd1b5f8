/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/assets/convex_hull.hpp
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

#ifndef MF3D_ASSETS_CONVEX_HULL_HPP
#define MF3D_ASSETS_CONVEX_HULL_HPP

#include "mf3d/core/error.hpp"
#include "mf3d/core/types.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

namespace mf3d {
namespace assets {

/**
 * Incremental 3D convex hull of points in strictly convex position (every
 * point must end up a hull vertex, e.g. points on a sphere). Returns outward,
 * counter-clockwise triangles.
 *
 * Points are inserted in index order after an initial tetrahedron; the search
 * for visible faces starts from the faces created by the previous insertion,
 * which is close to linear time for spatially coherent orderings.
 */
inline std::vector<Triangle> convex_hull_triangles(const VertexMatrix& points)
{
    const auto n = static_cast<std::uint32_t>(points.rows());
    if (n < 4)
        throw Error(ErrorKind::invalid_argument, "convex hull needs at least 4 points");

    struct Face
    {
        std::uint32_t v[3];
        Eigen::Vector3d normal;
        double offset;
        bool alive;
    };
    std::vector<Face> faces;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_owner; // directed edge -> face
    auto key = [](std::uint32_t a, std::uint32_t b) { return (std::uint64_t(a) << 32) | b; };
    auto p = [&](std::uint32_t i) -> Eigen::Vector3d { return points.row(i).transpose(); };

    auto add_face = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        Face f{{a, b, c}, (p(b) - p(a)).cross(p(c) - p(a)), 0.0, true};
        f.offset = f.normal.dot(p(a));
        const auto id = static_cast<std::uint32_t>(faces.size());
        faces.push_back(f);
        edge_owner[key(a, b)] = id;
        edge_owner[key(b, c)] = id;
        edge_owner[key(c, a)] = id;
        return id;
    };
    auto visible = [&](const Face& f, const Eigen::Vector3d& q) {
        return f.normal.dot(q) - f.offset > 1e-14 * f.normal.norm();
    };

    const std::uint32_t seed_ids[4] = {0, n / 3, (2 * n) / 3, n - 1};
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (auto i : seed_ids)
        centroid += p(i) / 4.0;
    {
        const Eigen::Vector3d a = p(seed_ids[0]), b = p(seed_ids[1]), c = p(seed_ids[2]), d = p(seed_ids[3]);
        if (std::abs((b - a).cross(c - a).dot(d - a)) < 1e-14)
            throw Error(ErrorKind::invalid_argument, "initial hull tetrahedron is degenerate");
    }
    const int tet_faces[4][3] = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    std::vector<std::uint32_t> last_created;
    for (const auto& tf : tet_faces)
    {
        std::uint32_t a = seed_ids[tf[0]], b = seed_ids[tf[1]], c = seed_ids[tf[2]];
        const Eigen::Vector3d nrm = (p(b) - p(a)).cross(p(c) - p(a));
        if (nrm.dot(p(a) - centroid) < 0.0)
            std::swap(b, c);
        last_created.push_back(add_face(a, b, c));
    }

    std::vector<std::uint8_t> is_seed(n, 0);
    for (auto i : seed_ids)
        is_seed[i] = 1;
    std::vector<std::uint8_t> mark; // per-face visibility scratch
    for (std::uint32_t i = 0; i < n; ++i)
    {
        if (is_seed[i])
            continue;
        const Eigen::Vector3d q = p(i);
        mark.assign(faces.size(), 0);
        std::int64_t start = -1;
        for (auto f : last_created)
            if (faces[f].alive && visible(faces[f], q))
            {
                start = f;
                break;
            }
        if (start < 0)
            for (std::size_t f = 0; f < faces.size(); ++f)
                if (faces[f].alive && visible(faces[f], q))
                {
                    start = static_cast<std::int64_t>(f);
                    break;
                }
        if (start < 0)
            throw Error(ErrorKind::invalid_argument, "point " + std::to_string(i) + " is not in convex position");

        std::vector<std::uint32_t> region;
        std::deque<std::uint32_t> queue{static_cast<std::uint32_t>(start)};
        mark[start] = 1;
        while (!queue.empty())
        {
            const auto f = queue.front();
            queue.pop_front();
            region.push_back(f);
            for (int e = 0; e < 3; ++e)
            {
                const auto a = faces[f].v[e], b = faces[f].v[(e + 1) % 3];
                const auto nb = edge_owner.at(key(b, a));
                if (!mark[nb])
                {
                    mark[nb] = visible(faces[nb], q) ? 1 : 2;
                    if (mark[nb] == 1)
                        queue.push_back(nb);
                }
            }
        }
        std::vector<std::pair<std::uint32_t, std::uint32_t>> horizon;
        for (auto f : region)
            for (int e = 0; e < 3; ++e)
            {
                const auto a = faces[f].v[e], b = faces[f].v[(e + 1) % 3];
                if (mark[edge_owner.at(key(b, a))] != 1)
                    horizon.emplace_back(a, b);
            }
        for (auto f : region)
        {
            faces[f].alive = false;
            for (int e = 0; e < 3; ++e)
                edge_owner.erase(key(faces[f].v[e], faces[f].v[(e + 1) % 3]));
        }
        last_created.clear();
        for (const auto& [a, b] : horizon)
            last_created.push_back(add_face(a, b, i));
    }

    std::vector<Triangle> out;
    for (const auto& f : faces)
        if (f.alive)
            out.push_back({f.v[0], f.v[1], f.v[2]});
    return out;
}

} /* namespace assets */
} /* namespace mf3d */

#endif /* MF3D_ASSETS_CONVEX_HULL_HPP */
