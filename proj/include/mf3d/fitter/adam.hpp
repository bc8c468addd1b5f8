/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/fitter/adam.hpp
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

#ifndef MF3D_FITTER_ADAM_HPP
#define MF3D_FITTER_ADAM_HPP

#include "Eigen/Core"

#include <cmath>

namespace mf3d {
namespace fitter {

/**
 * Adam with bias-corrected first and second moment estimates and a
 * per-coordinate step scale.
 */
class Adam
{
public:
    Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), beta1_(beta1), beta2_(beta2), eps_(eps)
    {
    }

    /// x -= lr * scale * m_hat / (sqrt(v_hat) + eps)
    void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad, double lr, const Eigen::VectorXd& scale)
    {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x(i) -= lr * scale(i) * (m_(i) / c1) / (std::sqrt(v_(i) / c2) + eps_);
    }

    int iterations() const { return t_; }

private:
    Eigen::VectorXd m_, v_;
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

} /* namespace fitter */
} /* namespace mf3d */

#endif /* MF3D_FITTER_ADAM_HPP */
