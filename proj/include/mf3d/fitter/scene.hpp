/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/fitter/scene.hpp
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

#ifndef MF3D_FITTER_SCENE_HPP
#define MF3D_FITTER_SCENE_HPP

#include "mf3d/camera/camera.hpp"
#include "mf3d/morphable/face_params.hpp"

#include <vector>

namespace mf3d {

/**
 * One image's reconstruction: the shared camera and every face's parameters.
 * Each face carries its own image-plane center in pose.face_center.
 */
struct Scene
{
    camera::Intrinsics intr;
    std::vector<morphable::FaceParams> faces;
};

/// Throws unless the camera is valid, every face matches the bundle and lies in front of the camera.
inline void validate(const Scene& scene, const assets::BasisBundle& bundle)
{
    camera::validate(scene.intr);
    for (const auto& face : scene.faces)
    {
        morphable::check_dimensions(face, bundle);
        if (!(face.pose.trans_code.z() > 0.0))
            throw Error(ErrorKind::nonpositive_depth, "face depth must be positive");
    }
}

} /* namespace mf3d */

#endif /* MF3D_FITTER_SCENE_HPP */
