/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/eval/synth_scene.hpp
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

#ifndef MF3D_EVAL_SYNTH_SCENE_HPP
#define MF3D_EVAL_SYNTH_SCENE_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/detect/heatmap.hpp"
#include "mf3d/eval/metrics.hpp"
#include "mf3d/fitter/scene.hpp"
#include "mf3d/morphable/decode.hpp"
#include "mf3d/raster/render.hpp"

#include "Eigen/Geometry"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace mf3d {
namespace eval {

struct SynthOptions
{
    double max_coeff = 2.0;
    double max_yaw_deg = 80.0;
    double max_pitch_deg = 15.0;
    double max_roll_deg = 10.0;
    /// Depth of a lone face; scenes with n faces use base_depth * max(1, sqrt(n / 2)), up to 25% deeper.
    double base_depth = 20.0;
    double max_iou = 0.3;
    int max_attempts = 1000;
};

/// A rendered synthetic image with everything a fit and its evaluation need.
struct SynthScene
{
    Image image;
    Mask skin;
    std::vector<Landmarks> landmarks;
    std::vector<Eigen::Vector2d> centers;
    detect::Heatmap heatmap;
    Scene scene;
};

/// Intersection over union of two axis-aligned boxes given as (min, max) corners.
inline double box_iou(const Eigen::Vector4d& a, const Eigen::Vector4d& b)
{
    const double iw = std::max(0.0, std::min(a(2), b(2)) - std::max(a(0), b(0)));
    const double ih = std::max(0.0, std::min(a(3), b(3)) - std::max(a(1), b(1)));
    const double inter = iw * ih;
    const double area_a = (a(2) - a(0)) * (a(3) - a(1));
    const double area_b = (b(2) - b(0)) * (b(3) - b(1));
    return inter > 0.0 ? inter / (area_a + area_b - inter) : 0.0;
}

/**
 * Random scene of n_faces faces drawn from the model: coefficients from a
 * standard normal truncated to [-max_coeff, max_coeff], yaw uniform in
 * [-max_yaw, max_yaw] (smaller pitch and roll), near-neutral random lighting
 * and d_x = d_y = 0 at a continuous image-plane center. Faces lie fully in
 * frame with pairwise projected-box IoU below max_iou. The image is the
 * scene's render, the skin mask its coverage, and the landmarks are the
 * projected landmark vertices (all marked visible).
 */
inline SynthScene synth_scene(std::uint64_t seed, int n_faces, int width, int height,
                              const assets::BasisBundle& bundle, const SynthOptions& opt = {})
{
    if (n_faces < 1 || n_faces > 10)
        throw Error(ErrorKind::invalid_argument, "synth_scene supports 1 to 10 faces");
    SynthScene out;
    out.scene.intr = camera::Intrinsics::with_default_focal(width, height);
    camera::validate(out.scene.intr);
    const auto& intr = out.scene.intr;
    std::mt19937_64 rng(seed ^ 0xC0FFEE1234567ull);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto coeff = [&]() {
        double v;
        do
            v = normal(rng);
        while (std::abs(v) > opt.max_coeff);
        return v;
    };
    const double deg = std::numbers::pi / 180.0;
    const double depth0 = opt.base_depth * std::max(1.0, std::sqrt(n_faces / 2.0));

    std::vector<Eigen::Vector4d> boxes;
    int attempts = 0;
    for (int k = 0; k < n_faces; ++k)
    {
        auto f = morphable::FaceParams::zeros_like(bundle);
        for (auto* v : {&f.id, &f.exp, &f.alb})
            for (Eigen::Index i = 0; i < v->size(); ++i)
                (*v)(i) = coeff();
        const Eigen::Matrix3d r =
            (Eigen::AngleAxisd(opt.max_roll_deg * deg * uni(rng), Eigen::Vector3d::UnitZ()) *
             Eigen::AngleAxisd(opt.max_yaw_deg * deg * uni(rng), Eigen::Vector3d::UnitY()) *
             Eigen::AngleAxisd(opt.max_pitch_deg * deg * uni(rng), Eigen::Vector3d::UnitX()))
                .toRotationMatrix();
        const Eigen::AngleAxisd aa(r);
        f.pose.rot = aa.angle() * aa.axis();
        f.illum = shading::neutral_light() * (1.0 + 0.1 * uni(rng));
        for (int i = 1; i < 9; ++i)
            for (int c = 0; c < 3; ++c)
                f.illum(i, c) = 0.15 * uni(rng);
        const VertexMatrix model = morphable::decode_shape(f, bundle);
        bool placed = false;
        while (!placed)
        {
            if (++attempts > opt.max_attempts)
                throw Error(ErrorKind::placement_failure,
                            "could not place " + std::to_string(n_faces) + " faces after " +
                                std::to_string(opt.max_attempts) + " attempts");
            f.pose.face_center = Eigen::Vector2d((0.5 + 0.4 * uni(rng)) * width, (0.5 + 0.4 * uni(rng)) * height);
            f.pose.trans_code = Eigen::Vector3d(0.0, 0.0, depth0 * (1.0 + 0.125 * (1.0 + uni(rng))));
            const auto proj = camera::project(model, f.pose, intr);
            const Eigen::Vector2d lo = proj.pixels.colwise().minCoeff().transpose();
            const Eigen::Vector2d hi = proj.pixels.colwise().maxCoeff().transpose();
            if (lo.x() < 0.0 || lo.y() < 0.0 || hi.x() > width || hi.y() > height)
                continue;
            const Eigen::Vector4d box(lo.x(), lo.y(), hi.x(), hi.y());
            placed = true;
            for (const auto& other : boxes)
                placed = placed && box_iou(box, other) < opt.max_iou;
            if (placed)
                boxes.push_back(box);
        }
        out.scene.faces.push_back(f);
        out.centers.push_back(f.pose.face_center);
    }

    const auto fwd = raster::forward_scene(out.scene, bundle);
    out.image = fwd.render.rgb;
    out.skin = fwd.render.mask;
    for (const auto& face : fwd.faces)
    {
        Landmarks lm;
        lm.points = morphable::project_landmarks(face.decoded, bundle, intr);
        out.landmarks.push_back(lm);
    }
    out.heatmap = detect::build_gt_heatmap(out.centers, width, height);
    return out;
}

/// Projected landmarks (68 x 2) and all vertices (N x 2) of every face.
struct ProjectedScene
{
    std::vector<Points2> landmarks;
    std::vector<Points2> vertices;
    std::vector<Eigen::Matrix3d> rotations;
};

inline ProjectedScene project_scene(const Scene& scene, const assets::BasisBundle& bundle)
{
    ProjectedScene p;
    for (const auto& f : scene.faces)
    {
        const auto face = morphable::decode(f, bundle, scene.intr);
        const auto proj = camera::project_camera_points(face.shape_cam, scene.intr);
        Points2 lm(kNumLandmarks, 2);
        for (int j = 0; j < kNumLandmarks; ++j)
            lm.row(j) = proj.pixels.row(bundle.landmark_indices[j]);
        p.landmarks.push_back(lm);
        p.vertices.push_back(proj.pixels);
        p.rotations.push_back(face.rotation);
    }
    return p;
}

/**
 * Sparse (68 landmarks) and dense (all vertices) NME of predicted vs.
 * ground-truth faces, both normalized by the ground-truth landmark box, plus
 * the ground-truth yaw bucket. Each ground-truth face (in order) is paired
 * with the unused predicted face whose face_center is nearest; records follow
 * the ground-truth order.
 */
inline std::vector<EvalRecord> evaluate_scene(const Scene& pred, const Scene& gt, const assets::BasisBundle& bundle)
{
    if (pred.faces.size() != gt.faces.size())
        throw Error(ErrorKind::shape_mismatch, "predicted and ground-truth scenes differ in face count");
    const auto p = project_scene(pred, bundle);
    const auto g = project_scene(gt, bundle);
    std::vector<bool> used(pred.faces.size(), false);
    std::vector<EvalRecord> records;
    for (std::size_t k = 0; k < gt.faces.size(); ++k)
    {
        std::size_t m = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pred.faces.size(); ++j)
        {
            const double d = (pred.faces[j].pose.face_center - gt.faces[k].pose.face_center).norm();
            if (!used[j] && d < best)
            {
                best = d;
                m = j;
            }
        }
        used[m] = true;
        EvalRecord r;
        const double norm = bbox_size(g.landmarks[k]);
        r.nme68 = nme(p.landmarks[m], g.landmarks[k], norm);
        r.nme_dense = nme(p.vertices[m], g.vertices[k], norm);
        r.yaw_bucket = yaw_bucket(yaw_degrees(g.rotations[k]));
        records.push_back(r);
    }
    return records;
}

} /* namespace eval */
} /* namespace mf3d */

#endif /* MF3D_EVAL_SYNTH_SCENE_HPP */
