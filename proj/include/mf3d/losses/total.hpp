/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/losses/total.hpp
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

#ifndef MF3D_LOSSES_TOTAL_HPP
#define MF3D_LOSSES_TOTAL_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/detect/heatmap.hpp"
#include "mf3d/fitter/scene.hpp"
#include "mf3d/losses/terms.hpp"
#include "mf3d/losses/weights.hpp"
#include "mf3d/raster/render.hpp"

#include <vector>

namespace mf3d {
namespace losses {

/// What a scene is fitted against.
struct Observations
{
    Image image;
    Mask skin;
    /// One entry per face, in scene order; required when the landmark term is active.
    std::vector<Landmarks> landmarks;
    /// Ground-truth center cells and the predicted grid for the center term (optional).
    std::vector<detect::GridCell> gt_cells;
    const detect::Heatmap* heatmap = nullptr;
};

/// Terms switched on for an evaluation. reg covers both the prior and albedo flatness.
struct ActiveTerms
{
    bool c = true;
    bool pix = true;
    bool per = true;
    bool lan = true;
    bool reg = true;
};

struct LossOptions
{
    ActiveTerms active;
    /// Feature extractor of the perception term; the pooled-gray stand-in when null.
    const FeatureExtractor* extractor = nullptr;
    /// Fixed per-face perception boxes; when empty, boxes come from the padded projected mesh bounds.
    std::vector<Box> perception_boxes;
    double perception_pad = 0.1;
    bool gradients = true;
};

struct LossResult
{
    LossBreakdown breakdown;
    /// Gradient of the total w.r.t. each face's parameters (empty unless requested).
    std::vector<morphable::FaceParams> grads;
    raster::SceneForward forward;
    /// Pixels entering the photometric terms: skin mask and render coverage.
    Mask region;
};

/**
 * Evaluates the weighted objective for a scene and, optionally, its gradient
 * w.r.t. every face's parameters. Image-space gradients are combined into one
 * buffer and chained through raster, shading, projection and decoding; the
 * landmark, prior and albedo terms join at the decoded-face level. The center
 * term depends only on the supplied heatmap, so it adds no parameter gradient.
 */
inline LossResult total_loss(const Scene& scene, const assets::BasisBundle& bundle, const Observations& obs,
                             const LossWeights& w, const LossOptions& opt = {})
{
    const std::size_t n = scene.faces.size();
    const auto& intr = scene.intr;
    LossResult res;
    res.forward = raster::forward_scene(scene, bundle);
    const auto& fwd = res.forward;
    auto& b = res.breakdown;

    std::vector<morphable::DecodedFaceGrad> face_grads(n);
    Image grad_img;
    bool use_img_grad = false;
    auto image_grad = [&]() -> Image& {
        if (!use_img_grad)
        {
            grad_img = Image(intr.width, intr.height, 3);
            use_img_grad = true;
        }
        return grad_img;
    };

    if (opt.active.c && obs.heatmap && !obs.gt_cells.empty())
        b.c = center_focal_loss(*obs.heatmap, obs.gt_cells, w.gamma).value;

    const bool photometric = (opt.active.pix || opt.active.per) && n > 0;
    if (photometric)
    {
        if (obs.image.width != intr.width || obs.image.height != intr.height || obs.image.channels != 3)
            throw Error(ErrorKind::shape_mismatch, "target image does not match the camera frame");
        res.region = photometric_region(obs.skin, fwd.render.mask);
    }

    if (opt.active.pix && n > 0)
    {
        auto term = pixel_l21_loss(fwd.render.rgb, obs.image, res.region);
        b.pix = term.value;
        if (opt.gradients && w.lambda_pix > 0.0)
        {
            auto& g = image_grad();
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] += w.lambda_pix * term.grad.data[i];
        }
    }

    if (opt.active.per && n > 0)
    {
        const PooledGrayExtractor fallback;
        const FeatureExtractor& extractor = opt.extractor ? *opt.extractor : fallback;
        if (!opt.perception_boxes.empty() && opt.perception_boxes.size() != n)
            throw Error(ErrorKind::shape_mismatch, "one perception box per face is required");
        std::vector<Image> rendered, target;
        std::vector<Box> boxes;
        for (std::size_t k = 0; k < n; ++k)
        {
            const Box box = opt.perception_boxes.empty()
                                ? padded_bounds(fwd.faces[k].projection.pixels, intr.width, intr.height, opt.perception_pad)
                                : opt.perception_boxes[k];
            boxes.push_back(box);
            // Faces without a usable crop (e.g. pushed off-frame) still count towards n.
            if (box.width() < extractor.min_size() || box.height() < extractor.min_size())
            {
                rendered.emplace_back(extractor.min_size(), extractor.min_size(), 3);
                target.emplace_back(extractor.min_size(), extractor.min_size(), 3);
                boxes.back() = Box{};
                continue;
            }
            rendered.push_back(crop(fwd.render.rgb, box, &res.region));
            target.push_back(crop(obs.image, box, &res.region));
        }
        auto term = perception_loss(rendered, target, extractor);
        b.per = term.value;
        if (opt.gradients && w.lambda_per > 0.0)
        {
            auto& g = image_grad();
            for (std::size_t k = 0; k < n; ++k)
            {
                const Box& box = boxes[k];
                for (int y = box.y0; y < box.y1; ++y)
                    for (int x = box.x0; x < box.x1; ++x)
                    {
                        if (!res.region(x, y))
                            continue;
                        for (int c = 0; c < 3; ++c)
                            g.at(x, y, c) += w.lambda_per * term.grad[k].at(x - box.x0, y - box.y0, c);
                    }
            }
        }
    }

    if (opt.active.lan && n > 0)
    {
        if (obs.landmarks.size() != n)
            throw Error(ErrorKind::shape_mismatch, "landmark ground truth must be given for every face");
        std::vector<Points2> projected(n);
        for (std::size_t k = 0; k < n; ++k)
        {
            projected[k].resize(kNumLandmarks, 2);
            for (int j = 0; j < kNumLandmarks; ++j)
                projected[k].row(j) = fwd.faces[k].projection.pixels.row(bundle.landmark_indices[j]);
        }
        auto term = landmark_loss(projected, obs.landmarks, landmark_weights(bundle, w), w.landmark_normalize);
        b.lan = term.value;
        if (opt.gradients && w.lambda_lan > 0.0)
            for (std::size_t k = 0; k < n; ++k)
            {
                const auto& cam = fwd.faces[k].decoded.shape_cam;
                VertexMatrix lm_cam(kNumLandmarks, 3);
                for (int j = 0; j < kNumLandmarks; ++j)
                    lm_cam.row(j) = cam.row(bundle.landmark_indices[j]);
                const Points2 g_px = w.lambda_lan * term.grad[k];
                const VertexMatrix g_lm =
                    camera::project_backward(lm_cam, g_px, Eigen::VectorXd::Zero(kNumLandmarks), intr);
                auto& fg = face_grads[k];
                if (!fg.shape_cam.size())
                    fg.shape_cam = VertexMatrix::Zero(cam.rows(), 3);
                for (int j = 0; j < kNumLandmarks; ++j)
                    fg.shape_cam.row(bundle.landmark_indices[j]) += g_lm.row(j);
            }
    }

    PriorGrad prior_grad;
    if (opt.active.reg && n > 0)
    {
        auto prior = coefficient_prior(scene.faces, w);
        b.norm = prior.value;
        prior_grad = std::move(prior.grad);

        std::vector<VertexMatrix> albedos;
        for (const auto& f : fwd.faces)
            albedos.push_back(f.decoded.albedo);
        auto var = albedo_flatten_loss(albedos, bundle.skin_region);
        b.var = var.value;
        if (opt.gradients && w.lambda_var > 0.0)
            for (std::size_t k = 0; k < n; ++k)
                face_grads[k].albedo = w.lambda_var * var.grad[k];
    }

    combine(b, w);

    if (opt.gradients)
    {
        res.grads = raster::backward_scene(fwd, scene, bundle, use_img_grad ? &grad_img : nullptr, std::move(face_grads));
        if (opt.active.reg && w.lambda_norm > 0.0)
            for (std::size_t k = 0; k < n; ++k)
            {
                res.grads[k].id += w.lambda_norm * prior_grad.id[k];
                res.grads[k].exp += w.lambda_norm * prior_grad.exp[k];
                res.grads[k].alb += w.lambda_norm * prior_grad.alb[k];
            }
    }
    return res;
}

} /* namespace losses */
} /* namespace mf3d */

#endif /* MF3D_LOSSES_TOTAL_HPP */
