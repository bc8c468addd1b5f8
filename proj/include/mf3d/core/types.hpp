/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/core/types.hpp
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

#ifndef MF3D_CORE_TYPES_HPP
#define MF3D_CORE_TYPES_HPP

#include "mf3d/core/error.hpp"

#include "Eigen/Core"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mf3d {

/// Number of sparse landmarks per face (68-point Multi-PIE ordering).
inline constexpr int kNumLandmarks = 68;

/// Per-vertex 3-vectors, one row per vertex. Column-major storage makes this
/// planar (all x, then all y, then all z), identical to the on-disk layout.
using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Triangle = std::array<std::uint32_t, 3>;

/**
 * Row-major interleaved image with double-valued channels. RGB images hold
 * values in [0, 1].
 */
struct Image
{
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width(width), height(height), channels(channels),
          data(static_cast<std::size_t>(width) * height * channels, fill)
    {
    }

    std::size_t index(int x, int y, int c = 0) const
    {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    bool empty() const { return data.empty(); }
    bool same_size(const Image& other) const
    {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

/// Row-major boolean mask.
struct Mask
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int width, int height, bool fill = false)
        : width(width), height(height), data(static_cast<std::size_t>(width) * height, fill ? 1 : 0)
    {
    }

    bool operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool value) { data[static_cast<std::size_t>(y) * width + x] = value ? 1 : 0; }
    std::size_t count() const
    {
        std::size_t n = 0;
        for (auto v : data)
            n += v != 0;
        return n;
    }
};

/// Ground-truth (or predicted) 2D landmarks of one face with per-point visibility.
struct Landmarks
{
    Points2 points = Points2::Zero(kNumLandmarks, 2);
    std::vector<bool> visible = std::vector<bool>(kNumLandmarks, true);
};

} /* namespace mf3d */

#endif /* MF3D_CORE_TYPES_HPP */
