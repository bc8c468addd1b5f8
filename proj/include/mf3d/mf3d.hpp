/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/mf3d.hpp
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

#ifndef MF3D_MF3D_HPP
#define MF3D_MF3D_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/assets/mf3d_format.hpp"
#include "mf3d/assets/synth_bundle.hpp"
#include "mf3d/camera/camera.hpp"
#include "mf3d/core/config.hpp"
#include "mf3d/core/error.hpp"
#include "mf3d/core/image_io.hpp"
#include "mf3d/core/parallel.hpp"
#include "mf3d/core/types.hpp"
#include "mf3d/detect/heatmap.hpp"
#include "mf3d/eval/bench.hpp"
#include "mf3d/eval/metrics.hpp"
#include "mf3d/eval/synth_scene.hpp"
#include "mf3d/fitter/adam.hpp"
#include "mf3d/fitter/fit.hpp"
#include "mf3d/fitter/scene.hpp"
#include "mf3d/fitter/scene_io.hpp"
#include "mf3d/losses/terms.hpp"
#include "mf3d/losses/total.hpp"
#include "mf3d/losses/weights.hpp"
#include "mf3d/morphable/decode.hpp"
#include "mf3d/morphable/face_params.hpp"
#include "mf3d/raster/rasterizer.hpp"
#include "mf3d/raster/render.hpp"
#include "mf3d/shading/spherical_harmonics.hpp"

#endif /* MF3D_MF3D_HPP */
