/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/core/error.hpp
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

#ifndef MF3D_CORE_ERROR_HPP
#define MF3D_CORE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mf3d {

/**
 * Classifies every failure the library reports. The CLI maps these onto exit
 * codes (validation failures exit with 2, divergence with 3).
 */
enum class ErrorKind {
    bad_magic,
    truncated_payload,
    invariant_violation,
    io_failure,
    nonpositive_depth,
    behind_camera,
    dimension_mismatch,
    non_unit_normal,
    buffer_mismatch,
    shape_mismatch,
    empty_gt,
    probability_out_of_range,
    empty_region,
    extractor_failure,
    out_of_frame,
    diverged,
    no_faces_found,
    zero_norm,
    empty_input,
    placement_failure,
    invalid_argument,
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::bad_magic: return "bad-magic";
    case ErrorKind::truncated_payload: return "truncated-payload";
    case ErrorKind::invariant_violation: return "invariant-violation";
    case ErrorKind::io_failure: return "io-failure";
    case ErrorKind::nonpositive_depth: return "nonpositive-depth";
    case ErrorKind::behind_camera: return "behind-camera";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::non_unit_normal: return "non-unit-normal";
    case ErrorKind::buffer_mismatch: return "buffer-mismatch";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::empty_gt: return "empty-gt";
    case ErrorKind::probability_out_of_range: return "probability-out-of-range";
    case ErrorKind::empty_region: return "empty-region";
    case ErrorKind::extractor_failure: return "extractor-failure";
    case ErrorKind::out_of_frame: return "out-of-frame";
    case ErrorKind::diverged: return "diverged";
    case ErrorKind::no_faces_found: return "no-faces-found";
    case ErrorKind::zero_norm: return "zero-norm";
    case ErrorKind::empty_input: return "empty-input";
    case ErrorKind::placement_failure: return "placement-failure";
    case ErrorKind::invalid_argument: return "invalid-argument";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} /* namespace mf3d */

#endif /* MF3D_CORE_ERROR_HPP */
