/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/raster/render.hpp
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

#ifndef MF3D_RASTER_RENDER_HPP
#define MF3D_RASTER_RENDER_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/core/parallel.hpp"
#include "mf3d/fitter/scene.hpp"
#include "mf3d/morphable/decode.hpp"
#include "mf3d/raster/rasterizer.hpp"
#include "mf3d/shading/spherical_harmonics.hpp"

#include <vector>

namespace mf3d {
namespace raster {

/// Intermediate results of one face's forward pass, kept for the backward pass.
struct FaceForward
{
    morphable::DecodedFace decoded;
    VertexMatrix colors;
    camera::Projection projection;
};

/**
 * Forward pass of a whole scene. meshes[k] references bundle.triangles, so
 * the bundle must outlive this object.
 */
struct SceneForward
{
    std::vector<FaceForward> faces;
    std::vector<ScreenMesh> meshes;
    RenderOutput render;
};

/// Per-vertex SH shading of a decoded face.
inline VertexMatrix shade_vertices(const morphable::DecodedFace& face, const shading::SHCoeffs& sh)
{
    VertexMatrix colors(face.albedo.rows(), 3);
    for (Eigen::Index v = 0; v < colors.rows(); ++v)
        colors.row(v) = shading::shade(face.albedo.row(v).transpose(), face.normals.row(v).transpose(), sh).transpose();
    return colors;
}

/// Decode, shade and project every face (in parallel), then rasterize all faces in one pass.
inline SceneForward forward_scene(const Scene& scene, const assets::BasisBundle& bundle)
{
    SceneForward fwd;
    fwd.faces.resize(scene.faces.size());
    fwd.meshes.resize(scene.faces.size());
    parallel_for(scene.faces.size(), [&](std::size_t k) {
        const auto& params = scene.faces[k];
        auto& face = fwd.faces[k];
        face.decoded = morphable::decode(params, bundle, scene.intr);
        face.colors = shade_vertices(face.decoded, params.illum);
        face.projection = camera::project_camera_points(face.decoded.shape_cam, scene.intr);
        fwd.meshes[k] = ScreenMesh{face.projection.pixels, face.projection.depth, face.colors, &bundle.triangles};
    });
    fwd.render = rasterize(fwd.meshes, scene.intr);
    return fwd;
}

inline RenderOutput render_scene(const Scene& scene, const assets::BasisBundle& bundle)
{
    camera::validate(scene.intr);
    return forward_scene(scene, bundle).render;
}

/**
 * Chains an image-space gradient back through raster, shading, projection and
 * decoding. face_grads, when non-empty, holds additional per-face gradients
 * w.r.t. decoded fields (e.g. from landmark or albedo terms) that are merged
 * before decode_backward. Returns one parameter gradient per face.
 */
inline std::vector<morphable::FaceParams> backward_scene(const SceneForward& fwd, const Scene& scene,
                                                         const assets::BasisBundle& bundle, const Image* grad_rgb,
                                                         std::vector<morphable::DecodedFaceGrad> face_grads = {})
{
    const std::size_t n = scene.faces.size();
    face_grads.resize(n);
    std::vector<MeshGrad> mesh_grads;
    if (grad_rgb)
        mesh_grads = rasterize_backward(*grad_rgb, fwd.render, fwd.meshes);

    std::vector<morphable::FaceParams> grads(n);
    parallel_for(n, [&](std::size_t k) {
        const auto& params = scene.faces[k];
        const auto& face = fwd.faces[k];
        auto& fg = face_grads[k];
        const Eigen::Index nv = face.decoded.shape_cam.rows();
        shading::SHCoeffs g_sh = shading::SHCoeffs::Zero();
        if (grad_rgb)
        {
            const auto& mg = mesh_grads[k];
            VertexMatrix g_albedo = VertexMatrix::Zero(nv, 3), g_normals = VertexMatrix::Zero(nv, 3);
            for (Eigen::Index v = 0; v < nv; ++v)
            {
                const Eigen::Vector3d g_c = mg.colors.row(v).transpose();
                if (g_c.isZero(0.0))
                    continue;
                const auto sg = shading::shade_backward(g_c, face.decoded.albedo.row(v).transpose(),
                                                        face.decoded.normals.row(v).transpose(), params.illum);
                g_albedo.row(v) = sg.albedo.transpose();
                g_normals.row(v) = sg.normal.transpose();
                g_sh += sg.sh;
            }
            const VertexMatrix g_cam = camera::project_backward(face.decoded.shape_cam, mg.pixels, mg.depth, scene.intr);
            fg.shape_cam = fg.shape_cam.size() ? VertexMatrix(fg.shape_cam + g_cam) : g_cam;
            fg.albedo = fg.albedo.size() ? VertexMatrix(fg.albedo + g_albedo) : g_albedo;
            fg.normals = fg.normals.size() ? VertexMatrix(fg.normals + g_normals) : g_normals;
        }
        grads[k] = morphable::decode_backward(fg, params, bundle, scene.intr, face.decoded);
        grads[k].illum = g_sh;
    });
    return grads;
}

} /* namespace raster */
} /* namespace mf3d */

#endif /* MF3D_RASTER_RENDER_HPP */
