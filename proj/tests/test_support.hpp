/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: tests/test_support.hpp
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

#ifndef MF3D_TESTS_TEST_SUPPORT_HPP
#define MF3D_TESTS_TEST_SUPPORT_HPP

#include "mf3d/mf3d.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace mf3d {
namespace test {

/// Synthetic bundles shared across test cases (generation is deterministic).
inline const assets::BasisBundle& bundle64()
{
    static const auto b = assets::synth_bundle(1, 64);
    return b;
}

inline const assets::BasisBundle& bundle400()
{
    static const auto b = assets::synth_bundle(7, 400);
    return b;
}

/// Per-component relative error |a - b| / max(|a|, |b|, floor), maximized over components.
inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a(i) - b(i)) / std::max({std::abs(a(i)), std::abs(b(i)), floor}));
    return worst;
}

/// Relative error with the floor tied to the largest finite-difference entry.
inline double grad_rel_err(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric, double floor_fraction = 1e-4)
{
    return max_rel_err(analytic, numeric, std::max(floor_fraction * numeric.cwiseAbs().maxCoeff(), 1e-12));
}

/// Central differences of a scalar function.
inline Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                    double h)
{
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Random coefficients and a frontal-ish pose centered at (cx, cy).
inline morphable::FaceParams random_face(const assets::BasisBundle& bundle, std::mt19937_64& rng, double depth,
                                         const Eigen::Vector2d& center, double coeff_scale = 0.5,
                                         double rot_scale = 0.3)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto p = morphable::FaceParams::mean_face(bundle, depth, center);
    for (auto* v : {&p.id, &p.exp, &p.alb})
        for (Eigen::Index i = 0; i < v->size(); ++i)
            (*v)(i) = coeff_scale * normal(rng);
    p.pose.rot = rot_scale * Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
    p.pose.trans_code.x() = 3.0 * uni(rng);
    p.pose.trans_code.y() = 3.0 * uni(rng);
    for (int c = 0; c < 3; ++c)
        for (int k = 1; k < 9; ++k)
            p.illum(k, c) = 0.2 * uni(rng);
    return p;
}

/// A small scene, its observations and loss options set up for finite-difference checks.
struct FdProblem
{
    Scene scene;
    losses::Observations obs;
    losses::LossOptions opt;
    detect::Heatmap heatmap;
};

/**
 * Faces perturbed away from a rendered target so every term is active and
 * smooth: the photometric terms see only interior pixels of the current render
 * (fixed skin mask) and perception crops use fixed boxes.
 */
inline FdProblem fd_problem(const assets::BasisBundle& bundle, std::uint64_t seed, int n_faces = 1, int size = 64)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    FdProblem p;
    p.scene.intr = camera::Intrinsics::with_default_focal(size, size);
    Scene target;
    target.intr = p.scene.intr;
    for (int k = 0; k < n_faces; ++k)
    {
        const Eigen::Vector2d center(size * (0.5 + 0.25 * (k - (n_faces - 1) / 2.0)), size * (0.5 + 0.05 * uni(rng)));
        const double depth = 12.0 * (1.0 + 0.4 * (n_faces - 1));
        auto gt = random_face(bundle, rng, depth, center, 0.5, 0.3);
        target.faces.push_back(gt);
        auto f = gt;
        for (auto* v : {&f.id, &f.exp, &f.alb})
            for (Eigen::Index i = 0; i < v->size(); ++i)
                (*v)(i) += 0.3 * uni(rng);
        f.pose.rot += 0.05 * Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        f.pose.trans_code += Eigen::Vector3d(uni(rng), uni(rng), 0.5 * uni(rng));
        f.illum.row(0) *= 1.0 + 0.1 * uni(rng);
        p.scene.faces.push_back(f);
    }
    const auto target_render = raster::render_scene(target, bundle);
    p.obs.image = target_render.rgb;
    for (const auto& proj : eval::project_scene(target, bundle).landmarks)
    {
        Landmarks lm;
        lm.points = proj;
        p.obs.landmarks.push_back(lm);
    }
    const auto fwd = raster::forward_scene(p.scene, bundle);
    p.obs.skin = raster::interior_pixels(fwd.render, fwd.meshes, 2.0);
    for (const auto& f : fwd.faces)
        p.opt.perception_boxes.push_back(losses::padded_bounds(f.projection.pixels, size, size, 0.1));
    p.heatmap = detect::Heatmap::for_image(size, size);
    for (auto& v : p.heatmap.values)
        v = 0.05 + 0.9 * (0.5 + 0.5 * uni(rng));
    std::vector<Eigen::Vector2d> centers;
    for (const auto& f : p.scene.faces)
        centers.push_back(f.pose.face_center);
    p.obs.gt_cells = detect::positive_cells(detect::build_gt_heatmap(centers, size, size));
    p.obs.heatmap = &p.heatmap;
    return p;
}

/// Analytic and central-difference gradients of total_loss over every face parameter.
struct FdReport
{
    Eigen::VectorXd analytic;
    Eigen::VectorXd numeric;
    double max_rel = 0.0;
};

inline FdReport total_loss_fd(const Scene& scene, const assets::BasisBundle& bundle, const losses::Observations& obs,
                              const losses::LossWeights& w, losses::LossOptions opt, double h = 1e-4)
{
    const std::size_t n = scene.faces.size();
    const Eigen::Index dim = n ? scene.faces[0].dimension() : 0;
    FdReport r;
    opt.gradients = true;
    const auto res = losses::total_loss(scene, bundle, obs, w, opt);
    r.analytic.resize(static_cast<Eigen::Index>(n) * dim);
    Eigen::VectorXd x(r.analytic.size());
    for (std::size_t k = 0; k < n; ++k)
    {
        r.analytic.segment(static_cast<Eigen::Index>(k) * dim, dim) = res.grads[k].to_vector();
        x.segment(static_cast<Eigen::Index>(k) * dim, dim) = scene.faces[k].to_vector();
    }
    opt.gradients = false;
    auto f = [&](const Eigen::VectorXd& v) {
        Scene s = scene;
        for (std::size_t k = 0; k < n; ++k)
            s.faces[k].assign(v.segment(static_cast<Eigen::Index>(k) * dim, dim));
        return losses::total_loss(s, bundle, obs, w, opt).breakdown.total;
    };
    r.numeric = central_diff(f, x, h);
    r.max_rel = grad_rel_err(r.analytic, r.numeric);
    return r;
}

/// A fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("mf3d_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/**
 * Exhaustive peak scan: a cell is kept when no cell of its 3x3 window has a
 * larger (score, -row-major index) key. Survivors are ranked by that key.
 */
inline std::vector<detect::Peak> brute_force_peaks(const detect::Heatmap& hm, double threshold, int max_faces)
{
    auto key = [&](int r, int c) { return std::pair<double, int>(hm.at(r, c), -(r * hm.cols + c)); };
    std::vector<std::pair<std::pair<double, int>, detect::GridCell>> kept;
    for (int r = 0; r < hm.rows; ++r)
        for (int c = 0; c < hm.cols; ++c)
        {
            if (hm.at(r, c) < threshold)
                continue;
            auto best = key(r, c);
            for (int rr = std::max(0, r - 1); rr <= std::min(hm.rows - 1, r + 1); ++rr)
                for (int cc = std::max(0, c - 1); cc <= std::min(hm.cols - 1, c + 1); ++cc)
                    best = std::max(best, key(rr, cc));
            if (best == key(r, c))
                kept.push_back({best, {r, c}});
        }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<detect::Peak> out;
    for (const auto& k : kept)
        if (static_cast<int>(out.size()) < max_faces)
            out.push_back({k.second, k.first.first});
    return out;
}

/// A random grid whose values are quantized to tenths, so ties and plateaus are common.
inline detect::Heatmap random_grid(std::mt19937_64& rng, int rows, int cols)
{
    std::uniform_int_distribution<int> level(0, 10);
    detect::Heatmap hm(rows, cols);
    for (auto& v : hm.values)
        v = level(rng) / 10.0;
    return hm;
}

} /* namespace test */
} /* namespace mf3d */

#endif /* MF3D_TESTS_TEST_SUPPORT_HPP */
