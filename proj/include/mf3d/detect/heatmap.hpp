/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/detect/heatmap.hpp
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

#ifndef MF3D_DETECT_HEATMAP_HPP
#define MF3D_DETECT_HEATMAP_HPP

#include "mf3d/core/error.hpp"
#include "mf3d/core/image_io.hpp"
#include "mf3d/core/types.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mf3d {
namespace detect {

inline constexpr int kDefaultStride = 8;
inline constexpr double kDefaultPeakThreshold = 0.3;

/// A cell of the heatmap grid.
struct GridCell
{
    int row = 0;
    int col = 0;

    friend bool operator==(const GridCell&, const GridCell&) = default;
};

/**
 * Center-score grid of stride r over a w x h image: (h / r) rows by (w / r)
 * columns of values in [0, 1], stored row-major.
 */
struct Heatmap
{
    int rows = 0;
    int cols = 0;
    int stride = kDefaultStride;
    std::vector<double> values;

    Heatmap() = default;
    Heatmap(int rows, int cols, int stride = kDefaultStride, double fill = 0.0)
        : rows(rows), cols(cols), stride(stride), values(static_cast<std::size_t>(rows) * cols, fill)
    {
    }

    /// Grid for an image of the given size; the size must be a multiple of the stride.
    static Heatmap for_image(int width, int height, int stride = kDefaultStride)
    {
        if (stride <= 0 || width % stride != 0 || height % stride != 0)
            throw Error(ErrorKind::invalid_argument, "image size " + std::to_string(width) + "x" +
                                                         std::to_string(height) + " is not a multiple of stride " +
                                                         std::to_string(stride));
        return Heatmap(height / stride, width / stride, stride);
    }

    int index(int row, int col) const { return row * cols + col; }
    double& at(int row, int col) { return values[static_cast<std::size_t>(index(row, col))]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(index(row, col))]; }
};

struct Peak
{
    GridCell cell;
    double score = 0.0;
};

/**
 * Grid cell of a pixel-space center. The pixel-center convention puts cell k's
 * center at (k + 0.5) r, so the nearest cell is round(c / r - 0.5) with exact
 * halves rounded down; the result is clamped to the grid.
 */
inline GridCell center_to_cell(const Eigen::Vector2d& center, int rows, int cols, int stride)
{
    auto nearest = [&](double c, int count) {
        const int k = static_cast<int>(std::ceil(c / stride - 1.0));
        return std::clamp(k, 0, count - 1);
    };
    return {nearest(center.y(), rows), nearest(center.x(), cols)};
}

/// Binary ground-truth grid: 1 at each center's cell, 0 elsewhere.
inline Heatmap build_gt_heatmap(const std::vector<Eigen::Vector2d>& centers, int width, int height,
                                int stride = kDefaultStride)
{
    Heatmap hm = Heatmap::for_image(width, height, stride);
    for (const auto& c : centers)
    {
        if (!(c.x() >= 0.0 && c.x() <= width && c.y() >= 0.0 && c.y() <= height))
            throw Error(ErrorKind::out_of_frame, "face center (" + std::to_string(c.x()) + ", " +
                                                     std::to_string(c.y()) + ") lies outside the image");
        const auto cell = center_to_cell(c, hm.rows, hm.cols, stride);
        hm.at(cell.row, cell.col) = 1.0;
    }
    return hm;
}

/// Cells holding a positive label, in row-major order.
inline std::vector<GridCell> positive_cells(const Heatmap& gt)
{
    std::vector<GridCell> cells;
    for (int r = 0; r < gt.rows; ++r)
        for (int c = 0; c < gt.cols; ++c)
            if (gt.at(r, c) > 0.0)
                cells.push_back({r, c});
    return cells;
}

/**
 * Local maxima of the 3x3 neighborhood with score >= threshold, best first.
 * Cells are ordered by (score, smaller row-major index), so plateaus yield a
 * single peak at their first cell. There is deliberately no overlap
 * suppression.
 */
inline std::vector<Peak> extract_peaks(const Heatmap& hm, double threshold = kDefaultPeakThreshold,
                                       int max_faces = 10)
{
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error(ErrorKind::invalid_argument, "peak threshold must lie in (0, 1)");
    auto beats = [&](int r0, int c0, int r1, int c1) {
        const double a = hm.at(r0, c0), b = hm.at(r1, c1);
        return a > b || (a == b && hm.index(r0, c0) < hm.index(r1, c1));
    };
    std::vector<Peak> peaks;
    for (int r = 0; r < hm.rows; ++r)
        for (int c = 0; c < hm.cols; ++c)
        {
            if (!(hm.at(r, c) >= threshold))
                continue;
            bool is_peak = true;
            for (int dr = -1; dr <= 1 && is_peak; ++dr)
                for (int dc = -1; dc <= 1 && is_peak; ++dc)
                {
                    const int rr = r + dr, cc = c + dc;
                    if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= hm.rows || cc >= hm.cols)
                        continue;
                    is_peak = beats(r, c, rr, cc);
                }
            if (is_peak)
                peaks.push_back({{r, c}, hm.at(r, c)});
        }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.score > b.score; });
    if (max_faces >= 0 && peaks.size() > static_cast<std::size_t>(max_faces))
        peaks.resize(static_cast<std::size_t>(max_faces));
    return peaks;
}

/// Cell centers in pixels: ((col + 0.5) r, (row + 0.5) r).
inline std::vector<Eigen::Vector2d> peaks_to_face_centers(const std::vector<Peak>& peaks, int stride = kDefaultStride)
{
    std::vector<Eigen::Vector2d> centers;
    centers.reserve(peaks.size());
    for (const auto& p : peaks)
        centers.emplace_back((p.cell.col + 0.5) * stride, (p.cell.row + 0.5) * stride);
    return centers;
}

/// 16-bit PGM with value round(score * 65535).
inline void write_heatmap(const std::string& path, const Heatmap& hm)
{
    Image img(hm.cols, hm.rows, 1);
    img.data = hm.values;
    io::write_pgm(path, img, 16);
}

inline Heatmap read_heatmap(const std::string& path, int stride = kDefaultStride)
{
    const Image img = io::read_netpbm(path);
    if (img.channels != 1)
        throw Error(ErrorKind::invalid_argument, "heatmap '" + path + "' must be a single-channel PGM");
    Heatmap hm(img.height, img.width, stride);
    hm.values = img.data;
    return hm;
}

} /* namespace detect */
} /* namespace mf3d */

#endif /* MF3D_DETECT_HEATMAP_HPP */
