/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/eval/metrics.hpp
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

#ifndef MF3D_EVAL_METRICS_HPP
#define MF3D_EVAL_METRICS_HPP

#include "mf3d/core/error.hpp"
#include "mf3d/core/types.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace mf3d {
namespace eval {

/// sqrt(w * h) of the points' bounding box.
inline double bbox_size(const Points2& pts)
{
    if (pts.rows() == 0)
        return 0.0;
    const Eigen::Vector2d extent = (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).transpose();
    return std::sqrt(extent.x() * extent.y());
}

/// Mean point-to-point distance divided by `norm`, in percent.
inline double nme(const Points2& pred, const Points2& gt, double norm)
{
    if (pred.rows() != gt.rows() || pred.rows() == 0)
        throw Error(ErrorKind::shape_mismatch, "NME needs two equally sized, nonempty point sets");
    if (!(norm > 0.0))
        throw Error(ErrorKind::zero_norm, "NME normalizer must be positive");
    return 100.0 * (pred - gt).rowwise().norm().mean() / norm;
}

/// NME normalized by the ground-truth bounding-box size sqrt(w_box * h_box).
inline double nme(const Points2& pred, const Points2& gt) { return nme(pred, gt, bbox_size(gt)); }

/// Yaw angle (degrees) of a rotation, the heading about the camera's vertical axis.
inline double yaw_degrees(const Eigen::Matrix3d& r)
{
    return std::atan2(r(0, 2), r(2, 2)) * 180.0 / std::numbers::pi;
}

/// Buckets [0, 30), [30, 60) and [60, 90] of |yaw| in degrees, as 0, 1, 2.
inline int yaw_bucket(double yaw_deg)
{
    const double a = std::abs(yaw_deg);
    return a < 30.0 ? 0 : (a < 60.0 ? 1 : 2);
}

inline const char* yaw_bucket_name(int bucket)
{
    static const char* names[] = {"[0,30)", "[30,60)", "[60,90]"};
    return names[std::clamp(bucket, 0, 2)];
}

/// Per-face evaluation record.
struct EvalRecord
{
    double nme68 = 0.0;
    double nme_dense = 0.0;
    int yaw_bucket = 0;
};

/**
 * Cumulative error distribution: for each threshold (sorted ascending), the
 * fraction of errors <= threshold.
 */
inline std::vector<std::pair<double, double>> ced_curve(const std::vector<double>& errors,
                                                        std::vector<double> thresholds)
{
    if (errors.empty())
        throw Error(ErrorKind::empty_input, "CED needs at least one error");
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    std::sort(thresholds.begin(), thresholds.end());
    std::vector<std::pair<double, double>> curve;
    for (double t : thresholds)
    {
        const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        curve.emplace_back(t, static_cast<double>(count) / static_cast<double>(sorted.size()));
    }
    return curve;
}

/// Evenly spaced thresholds lo, lo + step, ..., up to hi inclusive.
inline std::vector<double> threshold_grid(double lo, double hi, int count)
{
    if (count < 1 || !(hi >= lo))
        throw Error(ErrorKind::invalid_argument, "bad threshold grid");
    std::vector<double> grid;
    for (int i = 0; i < count; ++i)
        grid.push_back(count == 1 ? hi : lo + (hi - lo) * i / (count - 1));
    return grid;
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double linear_r2(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxx > 0 && syy > 0 ? sxy * sxy / (sxx * syy) : 0.0;
}

} /* namespace eval */
} /* namespace mf3d */

#endif /* MF3D_EVAL_METRICS_HPP */
