/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/losses/weights.hpp
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

#ifndef MF3D_LOSSES_WEIGHTS_HPP
#define MF3D_LOSSES_WEIGHTS_HPP

#include "mf3d/core/config.hpp"
#include "mf3d/core/error.hpp"

#include <string>

namespace mf3d {
namespace losses {

/// Weights of the objective. Defaults are the published values.
struct LossWeights
{
    double lambda_c = 1.0;
    double lambda_pix = 100.0;
    double lambda_per = 0.01;
    double lambda_lan = 0.1;
    double lambda_norm = 1e-4;
    double lambda_var = 1e-3;
    double lambda_id = 1.0;
    double lambda_exp = 0.8;
    double lambda_alb = 0.0017;
    double gamma = 2.0;
    double omega_mouthnose = 20.0;
    double omega_other = 1.0;
    /// Divide the landmark term by the summed weights of the visible landmarks.
    bool landmark_normalize = true;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

inline void validate(const LossWeights& w)
{
    const double values[] = {w.lambda_c,  w.lambda_pix, w.lambda_per, w.lambda_lan,      w.lambda_norm, w.lambda_var,
                             w.lambda_id, w.lambda_exp, w.lambda_alb, w.gamma, w.omega_mouthnose, w.omega_other};
    for (double v : values)
        if (!(v >= 0.0))
            throw Error(ErrorKind::invalid_argument, "loss weights must be non-negative");
}

/// Reads [loss] keys (lambda_c, ..., omega_other, landmark_normalize) over the defaults.
inline LossWeights loss_weights_from_config(const Config& cfg)
{
    LossWeights w;
    w.lambda_c = cfg.get_double("loss.lambda_c", w.lambda_c);
    w.lambda_pix = cfg.get_double("loss.lambda_pix", w.lambda_pix);
    w.lambda_per = cfg.get_double("loss.lambda_per", w.lambda_per);
    w.lambda_lan = cfg.get_double("loss.lambda_lan", w.lambda_lan);
    w.lambda_norm = cfg.get_double("loss.lambda_norm", w.lambda_norm);
    w.lambda_var = cfg.get_double("loss.lambda_var", w.lambda_var);
    w.lambda_id = cfg.get_double("loss.lambda_id", w.lambda_id);
    w.lambda_exp = cfg.get_double("loss.lambda_exp", w.lambda_exp);
    w.lambda_alb = cfg.get_double("loss.lambda_alb", w.lambda_alb);
    w.gamma = cfg.get_double("loss.gamma", w.gamma);
    w.omega_mouthnose = cfg.get_double("loss.omega_mouthnose", w.omega_mouthnose);
    w.omega_other = cfg.get_double("loss.omega_other", w.omega_other);
    w.landmark_normalize = cfg.get_bool("loss.landmark_normalize", w.landmark_normalize);
    validate(w);
    return w;
}

/**
 * Unweighted term values plus the combined objective:
 * reg = lambda_norm * norm + lambda_var * var and
 * total = lambda_c * c + lambda_pix * pix + lambda_per * per + lambda_lan * lan + reg.
 * The norm term already contains lambda_id / lambda_exp / lambda_alb.
 */
struct LossBreakdown
{
    double c = 0.0;
    double pix = 0.0;
    double per = 0.0;
    double lan = 0.0;
    double norm = 0.0;
    double var = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

inline void combine(LossBreakdown& b, const LossWeights& w)
{
    b.reg = w.lambda_norm * b.norm + w.lambda_var * b.var;
    b.total = w.lambda_c * b.c + w.lambda_pix * b.pix + w.lambda_per * b.per + w.lambda_lan * b.lan + b.reg;
}

} /* namespace losses */
} /* namespace mf3d */

#endif /* MF3D_LOSSES_WEIGHTS_HPP */
