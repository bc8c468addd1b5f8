/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/fitter/fit.hpp
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

#ifndef MF3D_FITTER_FIT_HPP
#define MF3D_FITTER_FIT_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/core/config.hpp"
#include "mf3d/core/error.hpp"
#include "mf3d/detect/heatmap.hpp"
#include "mf3d/fitter/adam.hpp"
#include "mf3d/fitter/scene.hpp"
#include "mf3d/losses/total.hpp"
#include "mf3d/morphable/decode.hpp"

#include "Eigen/Core"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace mf3d {
namespace fitter {

/// Parameter blocks the optimizer may change.
struct FreeBlocks
{
    bool pose = true;
    bool id = true;
    bool exp = true;
    bool alb = true;
    bool illum = true;
};

/**
 * Fitting schedule. Every numeric default here is a tuning choice of this
 * library. Pose coordinates (rotation, d_x / translation_unit, d_y /
 * translation_unit, log d_z) take steps pose_step_scale times larger than
 * coefficient and lighting coordinates.
 */
struct FitConfig
{
    int stage1_iters = 300;
    int stage2_iters = 500;
    double step_size = 0.01;
    double decay_at = 0.75;
    double decay_factor = 0.1;
    double convergence_tol = 1e-6;
    int convergence_window = 20;
    double pose_step_scale = 10.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    /// Pixels of d_x / d_y per optimizer unit.
    double translation_unit = 1.0;
    double min_depth = 0.05;
    /// Depth of faces initialized without landmarks.
    double default_depth = 20.0;
    FreeBlocks free;
    double peak_threshold = detect::kDefaultPeakThreshold;
    int max_faces = 10;
    int stride = detect::kDefaultStride;
    losses::LossWeights weights;
};

inline void validate(const FitConfig& c)
{
    if (c.stage1_iters < 0 || c.stage2_iters < 0)
        throw Error(ErrorKind::invalid_argument, "iteration counts must be non-negative");
    if (!(c.step_size > 0.0) || !(c.pose_step_scale > 0.0) || !(c.translation_unit > 0.0) || !(c.decay_factor > 0.0))
        throw Error(ErrorKind::invalid_argument, "step sizes must be positive");
    if (!(c.min_depth > 0.0) || !(c.default_depth > 0.0))
        throw Error(ErrorKind::invalid_argument, "depths must be positive");
    if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0))
        throw Error(ErrorKind::invalid_argument, "Adam moment rates must lie in [0, 1)");
    if (c.convergence_window < 1)
        throw Error(ErrorKind::invalid_argument, "convergence window must be at least 1");
}

/// Reads [fit] and [loss] keys over the defaults.
inline FitConfig fit_config_from_config(const Config& cfg)
{
    FitConfig c;
    c.stage1_iters = cfg.get_int("fit.stage1_iters", c.stage1_iters);
    c.stage2_iters = cfg.get_int("fit.stage2_iters", c.stage2_iters);
    c.step_size = cfg.get_double("fit.step_size", c.step_size);
    c.decay_at = cfg.get_double("fit.decay_at", c.decay_at);
    c.decay_factor = cfg.get_double("fit.decay_factor", c.decay_factor);
    c.convergence_tol = cfg.get_double("fit.convergence_tol", c.convergence_tol);
    c.convergence_window = cfg.get_int("fit.convergence_window", c.convergence_window);
    c.pose_step_scale = cfg.get_double("fit.pose_step_scale", c.pose_step_scale);
    c.adam_beta1 = cfg.get_double("fit.adam_beta1", c.adam_beta1);
    c.adam_beta2 = cfg.get_double("fit.adam_beta2", c.adam_beta2);
    c.translation_unit = cfg.get_double("fit.translation_unit", c.translation_unit);
    c.min_depth = cfg.get_double("fit.min_depth", c.min_depth);
    c.default_depth = cfg.get_double("fit.default_depth", c.default_depth);
    c.peak_threshold = cfg.get_double("detect.threshold", c.peak_threshold);
    c.max_faces = cfg.get_int("detect.max_faces", c.max_faces);
    c.stride = cfg.get_int("detect.stride", c.stride);
    c.weights = losses::loss_weights_from_config(cfg);
    validate(c);
    return c;
}

/// One evaluation of the objective during fitting.
struct TraceRow
{
    int iter = 0;
    losses::LossBreakdown loss;
};

struct FitResult
{
    Scene scene;
    losses::LossBreakdown breakdown;
    std::vector<TraceRow> trace;
};

/// Raised when the objective becomes NaN or infinite; carries the trace so far.
class DivergedError : public Error
{
public:
    DivergedError(const std::string& what, std::vector<TraceRow> trace)
        : Error(ErrorKind::diverged, what), trace_(std::move(trace))
    {
    }
    const std::vector<TraceRow>& trace() const { return trace_; }

private:
    std::vector<TraceRow> trace_;
};

namespace detail {

inline constexpr Eigen::Index kPoseSlots = 6;

inline Eigen::Index packed_size(const morphable::FaceParams& f)
{
    return kPoseSlots + f.id.size() + f.exp.size() + f.alb.size() + 27;
}

// Optimizer coordinates of one face: [rot, d_x / u, d_y / u, log d_z, id, exp, alb, illum].
inline void pack(const morphable::FaceParams& f, double unit, Eigen::Ref<Eigen::VectorXd> x)
{
    x.segment<3>(0) = f.pose.rot;
    x(3) = f.pose.trans_code.x() / unit;
    x(4) = f.pose.trans_code.y() / unit;
    x(5) = std::log(f.pose.trans_code.z());
    Eigen::Index o = kPoseSlots;
    x.segment(o, f.id.size()) = f.id;
    o += f.id.size();
    x.segment(o, f.exp.size()) = f.exp;
    o += f.exp.size();
    x.segment(o, f.alb.size()) = f.alb;
    o += f.alb.size();
    x.segment(o, 27) = Eigen::Map<const Eigen::Matrix<double, 27, 1>>(f.illum.data());
}

inline void unpack(const Eigen::Ref<const Eigen::VectorXd>& x, double unit, morphable::FaceParams& f)
{
    f.pose.rot = x.segment<3>(0);
    f.pose.trans_code = Eigen::Vector3d(x(3) * unit, x(4) * unit, std::exp(x(5)));
    Eigen::Index o = kPoseSlots;
    f.id = x.segment(o, f.id.size());
    o += f.id.size();
    f.exp = x.segment(o, f.exp.size());
    o += f.exp.size();
    f.alb = x.segment(o, f.alb.size());
    o += f.alb.size();
    Eigen::Map<Eigen::Matrix<double, 27, 1>>(f.illum.data()) = x.segment(o, 27);
}

// Chain rule from parameter gradients to optimizer coordinates.
inline void pack_gradient(const morphable::FaceParams& g, const morphable::FaceParams& f, double unit,
                          Eigen::Ref<Eigen::VectorXd> out)
{
    pack(g, 1.0, out);
    out(3) = g.pose.trans_code.x() * unit;
    out(4) = g.pose.trans_code.y() * unit;
    out(5) = g.pose.trans_code.z() * f.pose.trans_code.z();
}

inline void block_scales(const morphable::FaceParams& f, const FitConfig& cfg, Eigen::Ref<Eigen::VectorXd> s)
{
    const auto& fr = cfg.free;
    s.segment(0, kPoseSlots).setConstant(fr.pose ? cfg.pose_step_scale : 0.0);
    Eigen::Index o = kPoseSlots;
    s.segment(o, f.id.size()).setConstant(fr.id ? 1.0 : 0.0);
    o += f.id.size();
    s.segment(o, f.exp.size()).setConstant(fr.exp ? 1.0 : 0.0);
    o += f.exp.size();
    s.segment(o, f.alb.size()).setConstant(fr.alb ? 1.0 : 0.0);
    o += f.alb.size();
    s.segment(o, 27).setConstant(fr.illum ? 1.0 : 0.0);
}

inline bool finite(const losses::LossBreakdown& b) { return std::isfinite(b.total); }

inline Eigen::Vector2d eye_center(const Points2& lm, int first)
{
    return lm.middleRows(first, 6).colwise().mean().transpose();
}

} /* namespace detail */

/**
 * Runs one stage of Adam on all faces jointly with the given loss terms. The
 * step size decays by decay_factor after decay_at of the iterations; the stage
 * stops early once the total changes by less than convergence_tol (relative)
 * over convergence_window iterations. Every evaluated iterate is appended to
 * `trace`, and the lowest-loss iterate is returned, so the returned loss never
 * exceeds the initial one. Depth is optimized as log d_z and floored at
 * min_depth.
 */
inline Scene fit_stage(const Scene& initial, const assets::BasisBundle& bundle, const losses::Observations& obs,
                       const losses::ActiveTerms& active, const FitConfig& cfg, int iters,
                       std::vector<TraceRow>& trace, int iter_offset = 0)
{
    validate(cfg);
    Scene scene = initial;
    const std::size_t n = scene.faces.size();
    std::vector<Eigen::Index> offsets(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k)
        offsets[k + 1] = offsets[k] + detail::packed_size(scene.faces[k]);
    Eigen::VectorXd x(offsets[n]), grad(offsets[n]), scale(offsets[n]);
    for (std::size_t k = 0; k < n; ++k)
    {
        const auto len = offsets[k + 1] - offsets[k];
        detail::pack(scene.faces[k], cfg.translation_unit, x.segment(offsets[k], len));
        detail::block_scales(scene.faces[k], cfg, scale.segment(offsets[k], len));
    }
    auto load = [&](const Eigen::VectorXd& v) {
        for (std::size_t k = 0; k < n; ++k)
            detail::unpack(v.segment(offsets[k], offsets[k + 1] - offsets[k]), cfg.translation_unit, scene.faces[k]);
    };

    losses::LossOptions opt;
    opt.active = active;
    Adam adam(x.size(), cfg.adam_beta1, cfg.adam_beta2);
    Eigen::VectorXd best_x = x;
    double best_total = std::numeric_limits<double>::infinity();
    std::vector<double> totals;
    const double log_floor = std::log(cfg.min_depth);
    const int decay_iter = static_cast<int>(std::ceil(cfg.decay_at * iters));

    for (int it = 0; it <= iters; ++it)
    {
        load(x);
        opt.gradients = it < iters;
        const auto res = losses::total_loss(scene, bundle, obs, cfg.weights, opt);
        trace.push_back({iter_offset + it, res.breakdown});
        if (!detail::finite(res.breakdown))
            throw DivergedError("objective became non-finite at iteration " + std::to_string(iter_offset + it), trace);
        totals.push_back(res.breakdown.total);
        if (res.breakdown.total < best_total)
        {
            best_total = res.breakdown.total;
            best_x = x;
        }
        if (it == iters)
            break;
        const int w = cfg.convergence_window;
        if (it >= w)
        {
            const double ref = totals[it - w];
            if (std::abs(totals[it] - ref) <= cfg.convergence_tol * std::abs(ref))
                break;
        }
        for (std::size_t k = 0; k < n; ++k)
            detail::pack_gradient(res.grads[k], scene.faces[k], cfg.translation_unit,
                                  grad.segment(offsets[k], offsets[k + 1] - offsets[k]));
        const double lr = cfg.step_size * (it >= decay_iter ? cfg.decay_factor : 1.0);
        adam.step(x, grad, lr, scale);
        for (std::size_t k = 0; k < n; ++k)
        {
            auto seg = x.segment(offsets[k], offsets[k + 1] - offsets[k]);
            seg(5) = std::max(seg(5), log_floor);
            // Keep the axis-angle vector canonical (|rot| < pi).
            const double angle = seg.segment<3>(0).norm();
            if (angle > std::numbers::pi)
                seg.segment<3>(0) *= 1.0 - 2.0 * std::numbers::pi / angle;
        }
    }
    load(best_x);
    return scene;
}

/**
 * Mean-face start for each center: zero coefficients and rotation, d_x =
 * d_y = 0 and neutral light. With landmarks, d_z scales the mean face so its
 * projected inter-ocular distance (or, if that gives a smaller depth, its
 * vertical landmark extent) matches the observation; otherwise d_z is
 * cfg.default_depth.
 */
inline Scene init_scene(const std::vector<Eigen::Vector2d>& centers, const std::vector<Landmarks>* landmarks,
                        const camera::Intrinsics& intr, const assets::BasisBundle& bundle, const FitConfig& cfg = {})
{
    camera::validate(intr);
    if (landmarks && landmarks->size() != centers.size())
        throw Error(ErrorKind::shape_mismatch, "init_scene needs one landmark set per center");
    Scene scene;
    scene.intr = intr;
    for (std::size_t k = 0; k < centers.size(); ++k)
    {
        const auto& c = centers[k];
        if (!(c.x() >= 0.0 && c.x() <= intr.width && c.y() >= 0.0 && c.y() <= intr.height))
            throw Error(ErrorKind::out_of_frame, "face center outside the image");
        auto face = morphable::FaceParams::mean_face(bundle, cfg.default_depth, c);
        if (landmarks)
        {
            const auto ref = morphable::project_landmarks(morphable::decode(face, bundle, intr), bundle, intr);
            const auto& obs = (*landmarks)[k].points;
            const double iod_ref = (detail::eye_center(ref, 36) - detail::eye_center(ref, 42)).norm();
            const double iod_obs = (detail::eye_center(obs, 36) - detail::eye_center(obs, 42)).norm();
            const double h_ref = ref.col(1).maxCoeff() - ref.col(1).minCoeff();
            const double h_obs = obs.col(1).maxCoeff() - obs.col(1).minCoeff();
            double ratio = std::numeric_limits<double>::infinity();
            if (iod_obs > 0.0 && iod_ref > 0.0)
                ratio = iod_ref / iod_obs;
            if (h_obs > 0.0 && h_ref > 0.0)
                ratio = std::min(ratio, h_ref / h_obs);
            if (std::isfinite(ratio))
                face.pose.trans_code.z() = std::max(cfg.min_depth, cfg.default_depth * ratio);
        }
        scene.faces.push_back(face);
    }
    return scene;
}

/// Inputs of a multi-face fit. Either a heatmap or explicit centers locate the faces.
struct FitInputs
{
    Image image;
    Mask skin;
    /// Optional per-face landmarks; with a heatmap, each peak takes the nearest unused set.
    std::vector<Landmarks> landmarks;
    const detect::Heatmap* heatmap = nullptr;
    std::vector<Eigen::Vector2d> centers;
};

/**
 * Joint fit of every face in an image: peaks (or given centers) -> init_scene
 * -> stage 1 (landmarks + regularizers) -> stage 2 (pixel, perception,
 * landmarks, regularizers). All faces share one camera and one composited
 * render. Face centers stay fixed.
 */
inline FitResult fit_multiface(const FitInputs& in, const camera::Intrinsics& intr, const assets::BasisBundle& bundle,
                               const FitConfig& cfg = {})
{
    validate(cfg);
    std::vector<Eigen::Vector2d> centers = in.centers;
    std::vector<Landmarks> landmarks = in.landmarks;
    if (in.heatmap)
    {
        centers = detect::peaks_to_face_centers(detect::extract_peaks(*in.heatmap, cfg.peak_threshold, cfg.max_faces),
                                                in.heatmap->stride);
        if (!in.landmarks.empty())
        {
            std::vector<bool> used(in.landmarks.size(), false);
            std::vector<Eigen::Vector2d> kept;
            landmarks.clear();
            for (const auto& c : centers)
            {
                int best = -1;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < in.landmarks.size(); ++j)
                {
                    const double d = (in.landmarks[j].points.colwise().mean().transpose() - c).norm();
                    if (!used[j] && d < best_d)
                    {
                        best_d = d;
                        best = static_cast<int>(j);
                    }
                }
                if (best < 0)
                    continue;
                used[best] = true;
                kept.push_back(c);
                landmarks.push_back(in.landmarks[best]);
            }
            centers = kept;
        }
    }
    if (centers.empty())
        throw Error(ErrorKind::no_faces_found, "no faces found");
    const bool have_landmarks = !landmarks.empty();
    if (have_landmarks && landmarks.size() != centers.size())
        throw Error(ErrorKind::shape_mismatch, "one landmark set per face is required");

    FitResult result;
    Scene scene = init_scene(centers, have_landmarks ? &landmarks : nullptr, intr, bundle, cfg);
    losses::Observations obs;
    obs.image = in.image;
    obs.skin = in.skin;
    obs.landmarks = landmarks;

    losses::ActiveTerms stage1{false, false, false, have_landmarks, true};
    scene = fit_stage(scene, bundle, obs, stage1, cfg, cfg.stage1_iters, result.trace, 0);
    const int offset = result.trace.empty() ? 0 : result.trace.back().iter + 1;
    losses::ActiveTerms stage2{false, true, true, have_landmarks, true};
    scene = fit_stage(scene, bundle, obs, stage2, cfg, cfg.stage2_iters, result.trace, offset);

    losses::LossOptions opt;
    opt.active = stage2;
    opt.gradients = false;
    result.breakdown = losses::total_loss(scene, bundle, obs, cfg.weights, opt).breakdown;
    result.scene = std::move(scene);
    return result;
}

} /* namespace fitter */
} /* namespace mf3d */

#endif /* MF3D_FITTER_FIT_HPP */
