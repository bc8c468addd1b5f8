/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/losses/terms.hpp
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

#ifndef MF3D_LOSSES_TERMS_HPP
#define MF3D_LOSSES_TERMS_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/core/error.hpp"
#include "mf3d/core/types.hpp"
#include "mf3d/detect/heatmap.hpp"
#include "mf3d/losses/weights.hpp"
#include "mf3d/morphable/face_params.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace mf3d {
namespace losses {

inline constexpr double kProbabilityClamp = 1e-7;

/// A scalar loss and, when requested, its gradient w.r.t. the term's direct input.
template <typename Grad>
struct Term
{
    double value = 0.0;
    Grad grad;
};

/**
 * Focal loss over the center grid, averaged over the n ground-truth faces.
 * Each cell contributes -(1 - p)^gamma log p with p = pred at positives and
 * 1 - pred elsewhere; predictions are clamped to [1e-7, 1 - 1e-7]. The gradient
 * is w.r.t. the predicted grid values (zero where the clamp is active).
 */
inline Term<std::vector<double>> center_focal_loss(const detect::Heatmap& pred,
                                                   const std::vector<detect::GridCell>& gt_centers,
                                                   double gamma = 2.0)
{
    if (gt_centers.empty())
        throw Error(ErrorKind::empty_gt, "focal loss needs at least one ground-truth center");
    std::vector<std::uint8_t> positive(pred.values.size(), 0);
    for (const auto& c : gt_centers)
    {
        if (c.row < 0 || c.col < 0 || c.row >= pred.rows || c.col >= pred.cols)
            throw Error(ErrorKind::out_of_frame, "ground-truth center cell outside the grid");
        positive[static_cast<std::size_t>(pred.index(c.row, c.col))] = 1;
    }
    const double n = static_cast<double>(gt_centers.size());
    Term<std::vector<double>> out;
    out.grad.assign(pred.values.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i)
    {
        const double raw = pred.values[i];
        if (!(raw >= 0.0 && raw <= 1.0))
            throw Error(ErrorKind::probability_out_of_range, "heatmap value " + std::to_string(raw) + " outside [0, 1]");
        const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
        const bool clamped = p != raw;
        // q is the probability assigned to the correct label.
        const double q = positive[i] ? p : 1.0 - p;
        const double w = std::pow(1.0 - q, gamma);
        sum += w * std::log(q);
        if (!clamped)
        {
            const double dw = gamma == 0.0 ? 0.0 : -gamma * std::pow(1.0 - q, gamma - 1.0);
            const double d_dq = -(dw * std::log(q) + w / q) / n;
            out.grad[i] = positive[i] ? d_dq : -d_dq;
        }
    }
    out.value = -sum / n;
    return out;
}

/// Pixels where both the skin mask and the render coverage are set.
inline Mask photometric_region(const Mask& skin, const Mask& coverage)
{
    if (skin.width != coverage.width || skin.height != coverage.height)
        throw Error(ErrorKind::shape_mismatch, "skin mask and render differ in size");
    Mask m(skin.width, skin.height);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = skin.data[i] && coverage.data[i];
    return m;
}

/**
 * Robust photometric term: mean over the region M of the per-pixel RGB
 * Euclidean distance. An empty region gives 0 with zero gradient. The
 * gradient is w.r.t. the rendered image.
 */
inline Term<Image> pixel_l21_loss(const Image& rendered, const Image& target, const Mask& region)
{
    if (!rendered.same_size(target) || rendered.channels != 3 || region.width != rendered.width ||
        region.height != rendered.height)
        throw Error(ErrorKind::shape_mismatch, "rendered image, target and mask must share their size");
    Term<Image> out;
    out.grad = Image(rendered.width, rendered.height, 3);
    const std::size_t count = region.count();
    if (count == 0)
        return out;
    double sum = 0.0;
    for (int y = 0; y < rendered.height; ++y)
        for (int x = 0; x < rendered.width; ++x)
        {
            if (!region(x, y))
                continue;
            const Eigen::Vector3d d(rendered.at(x, y, 0) - target.at(x, y, 0), rendered.at(x, y, 1) - target.at(x, y, 1),
                                    rendered.at(x, y, 2) - target.at(x, y, 2));
            const double norm = d.norm();
            sum += norm;
            if (norm > 0.0)
                for (int c = 0; c < 3; ++c)
                    out.grad.at(x, y, c) = d(c) / norm / static_cast<double>(count);
        }
    out.value = sum / static_cast<double>(count);
    return out;
}

/**
 * Maps an RGB crop to a fixed-length feature vector. backward returns the
 * gradient w.r.t. the crop given the gradient w.r.t. the features.
 */
class FeatureExtractor
{
public:
    virtual ~FeatureExtractor() = default;
    virtual Eigen::VectorXd extract(const Image& crop) const = 0;
    virtual Image backward(const Image& crop, const Eigen::VectorXd& grad_features) const = 0;
    /// Smallest crop side the extractor accepts.
    virtual int min_size() const { return 1; }
};

/**
 * Stand-in for a face-recognition embedding: Rec.601 luma averaged over a
 * grid x grid partition of the crop and scaled to unit length. An all-black
 * crop maps to the zero vector.
 */
class PooledGrayExtractor : public FeatureExtractor
{
public:
    explicit PooledGrayExtractor(int grid = 8) : grid_(grid) {}

    int min_size() const override { return grid_; }

    Eigen::VectorXd extract(const Image& crop) const override
    {
        const Eigen::VectorXd pooled = pool(crop);
        const double norm = pooled.norm();
        return norm > 0.0 ? Eigen::VectorXd(pooled / norm) : Eigen::VectorXd::Zero(pooled.size());
    }

    Image backward(const Image& crop, const Eigen::VectorXd& grad_features) const override
    {
        Eigen::VectorXd count;
        const Eigen::VectorXd pooled = pool(crop, &count);
        Image g(crop.width, crop.height, crop.channels);
        const double norm = pooled.norm();
        if (!(norm > 0.0))
            return g;
        const Eigen::VectorXd f = pooled / norm;
        const Eigen::VectorXd g_pooled = (grad_features - f * f.dot(grad_features)) / norm;
        for (int y = 0; y < crop.height; ++y)
            for (int x = 0; x < crop.width; ++x)
            {
                const int k = cell(y, crop.height) * grid_ + cell(x, crop.width);
                const double share = g_pooled(k) / count(k);
                for (int c = 0; c < 3; ++c)
                    g.at(x, y, c) = share * kLuma[c];
            }
        return g;
    }

private:
    static constexpr double kLuma[3] = {0.299, 0.587, 0.114};

    int cell(int pos, int extent) const { return static_cast<int>(static_cast<long long>(pos) * grid_ / extent); }

    Eigen::VectorXd pool(const Image& crop, Eigen::VectorXd* counts = nullptr) const
    {
        if (crop.channels != 3 || crop.width < grid_ || crop.height < grid_)
            throw Error(ErrorKind::extractor_failure, "crop of " + std::to_string(crop.width) + "x" +
                                                          std::to_string(crop.height) + " is smaller than the " +
                                                          std::to_string(grid_) + "x" + std::to_string(grid_) + " grid");
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(grid_ * grid_);
        Eigen::VectorXd count = Eigen::VectorXd::Zero(grid_ * grid_);
        for (int y = 0; y < crop.height; ++y)
            for (int x = 0; x < crop.width; ++x)
            {
                const int k = cell(y, crop.height) * grid_ + cell(x, crop.width);
                sum(k) += kLuma[0] * crop.at(x, y, 0) + kLuma[1] * crop.at(x, y, 1) + kLuma[2] * crop.at(x, y, 2);
                count(k) += 1.0;
            }
        if (counts)
            *counts = count;
        return sum.cwiseQuotient(count);
    }

    int grid_;
};

/// Axis-aligned pixel box [x0, x1) x [y0, y1).
struct Box
{
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

/// Bounds of projected points padded by `pad` of their size on each side, clipped to the image.
inline Box padded_bounds(const Points2& pixels, int width, int height, double pad = 0.1)
{
    if (pixels.rows() == 0)
        return {};
    const Eigen::Vector2d lo = pixels.colwise().minCoeff().transpose();
    const Eigen::Vector2d hi = pixels.colwise().maxCoeff().transpose();
    const Eigen::Vector2d margin = pad * (hi - lo);
    Box b;
    b.x0 = std::clamp(static_cast<int>(std::floor(lo.x() - margin.x())), 0, width);
    b.y0 = std::clamp(static_cast<int>(std::floor(lo.y() - margin.y())), 0, height);
    b.x1 = std::clamp(static_cast<int>(std::ceil(hi.x() + margin.x())), 0, width);
    b.y1 = std::clamp(static_cast<int>(std::ceil(hi.y() + margin.y())), 0, height);
    return b;
}

/// Copies a box out of an image, zeroing pixels outside `keep` when given.
inline Image crop(const Image& img, const Box& box, const Mask* keep = nullptr)
{
    Image out(box.width(), box.height(), img.channels);
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
        {
            if (keep && !(*keep)(x, y))
                continue;
            for (int c = 0; c < img.channels; ++c)
                out.at(x - box.x0, y - box.y0, c) = img.at(x, y, c);
        }
    return out;
}

/**
 * Mean squared feature distance over n crop pairs. The gradient holds one
 * image per rendered crop.
 */
inline Term<std::vector<Image>> perception_loss(const std::vector<Image>& rendered_crops,
                                                const std::vector<Image>& target_crops,
                                                const FeatureExtractor& extractor)
{
    if (rendered_crops.size() != target_crops.size())
        throw Error(ErrorKind::shape_mismatch, "perception loss needs one target crop per rendered crop");
    Term<std::vector<Image>> out;
    const double n = static_cast<double>(rendered_crops.size());
    for (std::size_t k = 0; k < rendered_crops.size(); ++k)
    {
        if (!rendered_crops[k].same_size(target_crops[k]))
            throw Error(ErrorKind::shape_mismatch, "rendered and target crops differ in size");
        const Eigen::VectorXd a = extractor.extract(rendered_crops[k]);
        const Eigen::VectorXd b = extractor.extract(target_crops[k]);
        if (a.size() != b.size())
            throw Error(ErrorKind::extractor_failure, "extractor returned features of different lengths");
        out.value += (a - b).squaredNorm() / n;
        out.grad.push_back(extractor.backward(rendered_crops[k], 2.0 * (a - b) / n));
    }
    return out;
}

/// Per-landmark weights from the mouth/nose mask.
inline Eigen::VectorXd landmark_weights(const assets::BasisBundle& bundle, const LossWeights& w)
{
    Eigen::VectorXd omega(kNumLandmarks);
    for (int j = 0; j < kNumLandmarks; ++j)
        omega(j) = bundle.mouthnose_mask[j] ? w.omega_mouthnose : w.omega_other;
    return omega;
}

/**
 * Weighted squared landmark reprojection error averaged over faces. Each
 * face's sum runs over its visible landmarks and, when `normalize` is set, is
 * divided by their summed weights. The gradient is w.r.t. the projections.
 */
inline Term<std::vector<Points2>> landmark_loss(const std::vector<Points2>& projected, const std::vector<Landmarks>& gt,
                                                const Eigen::VectorXd& omega, bool normalize = true)
{
    if (projected.size() != gt.size())
        throw Error(ErrorKind::shape_mismatch, "landmark loss needs ground truth for every face");
    Term<std::vector<Points2>> out;
    const double n = static_cast<double>(projected.size());
    for (std::size_t k = 0; k < projected.size(); ++k)
    {
        const auto& q = projected[k];
        const auto& g = gt[k];
        if (q.rows() != omega.size() || g.points.rows() != omega.size() ||
            g.visible.size() != static_cast<std::size_t>(omega.size()))
            throw Error(ErrorKind::shape_mismatch, "landmark arrays must have " + std::to_string(omega.size()) + " rows");
        Points2 grad = Points2::Zero(q.rows(), 2);
        double weight_sum = 0.0, sum = 0.0;
        for (Eigen::Index j = 0; j < q.rows(); ++j)
            if (g.visible[j])
            {
                weight_sum += omega(j);
                sum += omega(j) * (q.row(j) - g.points.row(j)).squaredNorm();
            }
        const double denom = normalize ? weight_sum : 1.0;
        if (weight_sum > 0.0 && denom > 0.0)
        {
            out.value += sum / denom / n;
            for (Eigen::Index j = 0; j < q.rows(); ++j)
                if (g.visible[j])
                    grad.row(j) = 2.0 * omega(j) * (q.row(j) - g.points.row(j)) / denom / n;
        }
        out.grad.push_back(grad);
    }
    return out;
}

/// Per-face gradients of the coefficient prior (only id/exp/alb are nonzero).
struct PriorGrad
{
    std::vector<Eigen::VectorXd> id, exp, alb;
};

/// Mean-face prior: mean over faces of lambda_id |id|^2 + lambda_exp |exp|^2 + lambda_alb |alb|^2.
inline Term<PriorGrad> coefficient_prior(const std::vector<morphable::FaceParams>& faces, const LossWeights& w)
{
    Term<PriorGrad> out;
    const double n = static_cast<double>(faces.size());
    for (const auto& f : faces)
    {
        out.value += (w.lambda_id * f.id.squaredNorm() + w.lambda_exp * f.exp.squaredNorm() +
                      w.lambda_alb * f.alb.squaredNorm()) /
                     n;
        out.grad.id.push_back(2.0 * w.lambda_id * f.id / n);
        out.grad.exp.push_back(2.0 * w.lambda_exp * f.exp / n);
        out.grad.alb.push_back(2.0 * w.lambda_alb * f.alb / n);
    }
    return out;
}

/**
 * Albedo flatness: mean over faces of the summed per-channel population
 * variance of the albedo over the skin region. The gradient is w.r.t. each
 * face's N x 3 albedo.
 */
inline Term<std::vector<VertexMatrix>> albedo_flatten_loss(const std::vector<VertexMatrix>& albedos,
                                                          const std::vector<std::uint32_t>& region)
{
    if (region.empty())
        throw Error(ErrorKind::empty_region, "albedo flatness needs a nonempty skin region");
    Term<std::vector<VertexMatrix>> out;
    const double n = static_cast<double>(albedos.size());
    const double m = static_cast<double>(region.size());
    for (const auto& a : albedos)
    {
        VertexMatrix grad = VertexMatrix::Zero(a.rows(), 3);
        for (int c = 0; c < 3; ++c)
        {
            double mean = 0.0;
            for (auto v : region)
                mean += a(v, c);
            mean /= m;
            double var = 0.0;
            for (auto v : region)
                var += (a(v, c) - mean) * (a(v, c) - mean);
            out.value += var / m / n;
            for (auto v : region)
                grad(v, c) += 2.0 * (a(v, c) - mean) / m / n;
        }
        out.grad.push_back(grad);
    }
    return out;
}

} /* namespace losses */
} /* namespace mf3d */

#endif /* MF3D_LOSSES_TERMS_HPP */
