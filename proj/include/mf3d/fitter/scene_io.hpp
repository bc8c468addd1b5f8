/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/fitter/scene_io.hpp
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

#ifndef MF3D_FITTER_SCENE_IO_HPP
#define MF3D_FITTER_SCENE_IO_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/core/error.hpp"
#include "mf3d/fitter/fit.hpp"
#include "mf3d/fitter/scene.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mf3d {
namespace fitter {

namespace detail {

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} /* namespace detail */

/**
 * Text scene file: a header line "f_g w h", then one line per face holding
 * the flattened parameters (center score, id, exp, alb, rot, trans_code,
 * illum) followed by c_x c_y. Values are written with 17 significant digits,
 * so files round-trip exactly.
 */
inline void write_scene(std::ostream& out, const Scene& scene)
{
    out << detail::format_double(scene.intr.focal) << ' ' << scene.intr.width << ' ' << scene.intr.height << '\n';
    for (const auto& f : scene.faces)
    {
        const Eigen::VectorXd v = f.to_vector();
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out << detail::format_double(v(i)) << ' ';
        out << detail::format_double(f.pose.face_center.x()) << ' ' << detail::format_double(f.pose.face_center.y())
            << '\n';
    }
}

inline void write_scene(const std::string& path, const Scene& scene)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    write_scene(out, scene);
    if (!out)
        throw Error(ErrorKind::io_failure, "write failed for '" + path + "'");
}

/// Reads a scene file; coefficient widths default to 80 / 64 / 80.
inline Scene read_scene(std::istream& in, int id_modes = assets::kIdentityModes,
                        int exp_modes = assets::kExpressionModes, int alb_modes = assets::kAlbedoModes)
{
    Scene scene;
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::truncated_payload, "scene file is empty");
    {
        std::istringstream header(line);
        if (!(header >> scene.intr.focal >> scene.intr.width >> scene.intr.height))
            throw Error(ErrorKind::invariant_violation, "scene header must be 'f_g w h'");
    }
    morphable::FaceParams proto;
    proto.id = Eigen::VectorXd::Zero(id_modes);
    proto.exp = Eigen::VectorXd::Zero(exp_modes);
    proto.alb = Eigen::VectorXd::Zero(alb_modes);
    const Eigen::Index dim = proto.dimension();
    while (std::getline(in, line))
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::istringstream row(line);
        std::vector<double> values;
        double v = 0.0;
        while (row >> v)
            values.push_back(v);
        if (!row.eof())
            throw Error(ErrorKind::invariant_violation, "scene file holds a non-numeric value");
        if (static_cast<Eigen::Index>(values.size()) != dim + 2)
            throw Error(ErrorKind::dimension_mismatch, "scene face line has " + std::to_string(values.size()) +
                                                           " values, expected " + std::to_string(dim + 2));
        morphable::FaceParams f = proto;
        f.assign(Eigen::Map<const Eigen::VectorXd>(values.data(), dim));
        f.pose.face_center = Eigen::Vector2d(values[dim], values[dim + 1]);
        scene.faces.push_back(f);
    }
    return scene;
}

inline Scene read_scene(const std::string& path, int id_modes = assets::kIdentityModes,
                        int exp_modes = assets::kExpressionModes, int alb_modes = assets::kAlbedoModes)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    return read_scene(in, id_modes, exp_modes, alb_modes);
}

/// Loss trace as CSV with columns iter,c,pix,per,lan,norm,var,total.
inline void write_trace(std::ostream& out, const std::vector<TraceRow>& trace)
{
    out << "iter,c,pix,per,lan,norm,var,total\n";
    for (const auto& r : trace)
    {
        const auto& b = r.loss;
        out << r.iter;
        for (double v : {b.c, b.pix, b.per, b.lan, b.norm, b.var, b.total})
            out << ',' << detail::format_double(v);
        out << '\n';
    }
}

inline void write_trace(const std::string& path, const std::vector<TraceRow>& trace)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    write_trace(out, trace);
}

} /* namespace fitter */
} /* namespace mf3d */

#endif /* MF3D_FITTER_SCENE_IO_HPP */
