/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/eval/bench.hpp
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

#ifndef MF3D_EVAL_BENCH_HPP
#define MF3D_EVAL_BENCH_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/detect/heatmap.hpp"
#include "mf3d/eval/synth_scene.hpp"
#include "mf3d/losses/total.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

namespace mf3d {
namespace eval {

inline constexpr int kCropSize = 224;

struct BenchRow
{
    int n = 0;
    double t_joint = 0.0;
    double t_perface = 0.0;
};

/// Bilinear resize of an image (pixel centers at +0.5).
inline Image resize_bilinear(const Image& src, int width, int height)
{
    Image out(width, height, src.channels);
    const double sx = static_cast<double>(src.width) / width, sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y)
    {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
        const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x)
        {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
            const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) = (1 - wy) * ((1 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c)) +
                                  wy * ((1 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c));
        }
    }
    return out;
}

/// Nearest-neighbor resize of a mask.
inline Mask resize_nearest(const Mask& src, int width, int height)
{
    Mask out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
        {
            const int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / width));
            const int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / height));
            out.set(x, y, src(sx, sy));
        }
    return out;
}

/**
 * Shared-pass versus per-face cost. For each scene size n, a synthetic scene
 * is evaluated two ways, each starting with the same full-frame center
 * extraction:
 *  - joint: one render + objective + gradient pass over the whole scene;
 *  - per-face: for every face, crop its padded landmark box, resize it to
 *    224 x 224 and run a single-face render + objective + gradient pass.
 * Times are medians over `runs` repetitions, in seconds.
 */
inline std::vector<BenchRow> bench_shared_decoder(const std::vector<int>& sizes, const assets::BasisBundle& bundle,
                                                  int width, int height, int runs = 5, std::uint64_t seed = 1)
{
    using clock = std::chrono::steady_clock;
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    const losses::LossWeights weights;
    losses::LossOptions opt;
    opt.active.c = false;
    std::vector<BenchRow> rows;
    for (int n : sizes)
    {
        if (n < 1)
            throw Error(ErrorKind::invalid_argument, "scene sizes must be at least 1");
        const auto ss = synth_scene(seed, n, width, height, bundle);
        losses::Observations obs;
        obs.image = ss.image;
        obs.skin = ss.skin;
        obs.landmarks = ss.landmarks;

        auto joint = [&]() {
            const auto peaks = detect::extract_peaks(ss.heatmap, detect::kDefaultPeakThreshold, n);
            const auto centers = detect::peaks_to_face_centers(peaks);
            const auto res = losses::total_loss(ss.scene, bundle, obs, weights, opt);
            return res.breakdown.total + static_cast<double>(centers.size());
        };
        auto perface = [&]() {
            const auto peaks = detect::extract_peaks(ss.heatmap, detect::kDefaultPeakThreshold, n);
            const auto centers = detect::peaks_to_face_centers(peaks);
            double sink = static_cast<double>(centers.size());
            for (int k = 0; k < n; ++k)
            {
                const auto& lm = ss.landmarks[k].points;
                const Eigen::Vector2d lo = lm.colwise().minCoeff().transpose(), hi = lm.colwise().maxCoeff().transpose();
                const Eigen::Vector2d mid = 0.5 * (lo + hi);
                const double side = std::max(8.0, 1.5 * (hi - lo).maxCoeff());
                losses::Box box;
                box.x0 = std::clamp(static_cast<int>(mid.x() - side / 2), 0, width - 1);
                box.y0 = std::clamp(static_cast<int>(mid.y() - side / 2), 0, height - 1);
                box.x1 = std::clamp(static_cast<int>(mid.x() + side / 2), box.x0 + 1, width);
                box.y1 = std::clamp(static_cast<int>(mid.y() + side / 2), box.y0 + 1, height);
                const double sx = static_cast<double>(kCropSize) / box.width();
                const double sy = static_cast<double>(kCropSize) / box.height();

                losses::Observations crop_obs;
                crop_obs.image = resize_bilinear(losses::crop(ss.image, box), kCropSize, kCropSize);
                Mask skin_box(box.width(), box.height());
                for (int y = box.y0; y < box.y1; ++y)
                    for (int x = box.x0; x < box.x1; ++x)
                        skin_box.set(x - box.x0, y - box.y0, ss.skin(x, y));
                crop_obs.skin = resize_nearest(skin_box, kCropSize, kCropSize);
                Landmarks crop_lm = ss.landmarks[k];
                for (Eigen::Index j = 0; j < crop_lm.points.rows(); ++j)
                {
                    crop_lm.points(j, 0) = (crop_lm.points(j, 0) - box.x0) * sx;
                    crop_lm.points(j, 1) = (crop_lm.points(j, 1) - box.y0) * sy;
                }
                crop_obs.landmarks = {crop_lm};

                Scene single;
                single.intr = camera::Intrinsics{ss.scene.intr.focal * sx, kCropSize, kCropSize};
                auto face = ss.scene.faces[k];
                face.pose.face_center = Eigen::Vector2d((face.pose.face_center.x() - box.x0) * sx,
                                                        (face.pose.face_center.y() - box.y0) * sy);
                single.faces = {face};
                sink += losses::total_loss(single, bundle, crop_obs, weights, opt).breakdown.total;
            }
            return sink;
        };

        joint();
        perface();
        std::vector<double> tj, tp;
        for (int r = 0; r < std::max(1, runs); ++r)
        {
            auto t0 = clock::now();
            volatile double a = joint();
            auto t1 = clock::now();
            volatile double b = perface();
            auto t2 = clock::now();
            (void)a;
            (void)b;
            tj.push_back(std::chrono::duration<double>(t1 - t0).count());
            tp.push_back(std::chrono::duration<double>(t2 - t1).count());
        }
        rows.push_back({n, median(tj), median(tp)});
    }
    return rows;
}

} /* namespace eval */
} /* namespace mf3d */

#endif /* MF3D_EVAL_BENCH_HPP */
