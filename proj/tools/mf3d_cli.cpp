/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: tools/mf3d_cli.cpp
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
#include "mf3d/mf3d.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace mf3d;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDiverged = 3;

/// Options shared by every subcommand.
struct Common
{
    std::string bundle = "synth:1000";
    std::uint64_t seed = 1;
    std::string config;
    int threads = 0;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--bundle", c.bundle,
                    "MF3D bundle file, or synth:<N>[:<seed>] for a generated bundle with N vertices")
        ->capture_default_str();
    cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd->add_option("--config", c.config, "TOML-style key = value config file ([loss], [fit], [detect] sections)");
    cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

assets::BasisBundle load_bundle(const Common& c)
{
    if (c.bundle.rfind("synth:", 0) == 0)
    {
        std::stringstream ss(c.bundle.substr(6));
        std::string n_str, seed_str;
        std::getline(ss, n_str, ':');
        std::getline(ss, seed_str, ':');
        const int n = std::stoi(n_str);
        const std::uint64_t seed = seed_str.empty() ? 1 : std::stoull(seed_str);
        return assets::synth_bundle(seed, n);
    }
    return assets::load_bundle(c.bundle);
}

Config load_config(const Common& c) { return c.config.empty() ? Config{} : Config::load(c.config); }

void apply_threads(const Common& c)
{
    set_num_threads(c.threads > 0 ? c.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
}

std::vector<Eigen::Vector2d> read_centers(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    std::vector<Eigen::Vector2d> centers;
    std::string line;
    while (std::getline(in, line))
    {
        for (auto& ch : line)
            if (ch == ',')
                ch = ' ';
        std::istringstream row(line);
        double x, y;
        if (row >> x >> y)
            centers.emplace_back(x, y);
    }
    return centers;
}

std::vector<double> read_numbers(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line))
    {
        const auto first = line.substr(0, line.find(','));
        try
        {
            std::size_t used = 0;
            const double v = std::stod(first, &used);
            values.push_back(v);
        } catch (const std::exception&)
        {
            // header or blank line
        }
    }
    return values;
}

std::ostream& open_output(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-")
        return std::cout;
    file.open(path);
    if (!file)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    return file;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mf3d: multi-face 3D morphable model reconstruction.\n"
                 "Exit codes: 0 success, 2 validation failure, 3 divergence."};
    app.require_subcommand(1);
    Common common;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-face scene");
    int synth_faces = 1, synth_w = 256, synth_h = 256;
    std::string synth_out = "synth_out";
    synth->add_option("--faces", synth_faces, "Number of faces (1-10)")->capture_default_str();
    synth->add_option("--width", synth_w, "Image width (multiple of 32)")->capture_default_str();
    synth->add_option("--height", synth_h, "Image height (multiple of 32)")->capture_default_str();
    synth->add_option("--out", synth_out,
                      "Output directory: image.png, skin.png, heatmap.pgm, landmarks_<k>.txt, centers.csv, scene.txt")
        ->capture_default_str();
    add_common(synth, common);

    // synth-bundle
    auto* synth_bundle_cmd = app.add_subcommand("synth-bundle", "Write a synthetic MF3D bundle");
    int bundle_vertices = 1000;
    std::string bundle_out;
    synth_bundle_cmd->add_option("--vertices", bundle_vertices, "Vertex count")->capture_default_str();
    synth_bundle_cmd->add_option("--out", bundle_out, "Output .mf3d path")->required();
    add_common(synth_bundle_cmd, common);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit all faces of an image jointly");
    std::string fit_image, fit_skin, fit_heatmap, fit_centers, fit_out = "scene.txt", fit_trace;
    std::vector<std::string> fit_landmarks;
    fit->add_option("--image", fit_image, "Target RGB image (PNG/PPM)")->required();
    fit->add_option("--skin", fit_skin, "Skin mask (PNG/PGM, nonzero = skin)")->required();
    fit->add_option("--landmarks", fit_landmarks, "Landmark files, one per face (68 lines of 'x y [visible]')");
    fit->add_option("--heatmap", fit_heatmap, "Center heatmap (16-bit PGM)");
    fit->add_option("--centers", fit_centers, "Face centers, one 'x,y' per line (used when no heatmap is given)");
    fit->add_option("--out", fit_out, "Fitted scene file")->capture_default_str();
    fit->add_option("--trace", fit_trace, "Loss trace CSV: iter,c,pix,per,lan,norm,var,total");
    add_common(fit, common);

    // render
    auto* render = app.add_subcommand("render", "Render a scene file");
    std::string render_scene_path, render_out = "render.png", render_mask, render_depth;
    render->add_option("--scene", render_scene_path, "Scene file")->required();
    render->add_option("--out", render_out, "Output image (.png or .ppm)")->capture_default_str();
    render->add_option("--mask-out", render_mask, "Debug: coverage mask as PGM");
    render->add_option("--depth-out", render_depth, "Debug: depth as 16-bit PGM scaled to [near, far]");
    add_common(render, common);

    // detect-peaks
    auto* peaks_cmd = app.add_subcommand("detect-peaks", "Extract face centers from a heatmap");
    std::string peaks_heatmap, peaks_out;
    double peaks_threshold = detect::kDefaultPeakThreshold;
    int peaks_max = 10, peaks_stride = detect::kDefaultStride;
    peaks_cmd->add_option("--heatmap", peaks_heatmap, "16-bit PGM heatmap")->required();
    peaks_cmd->add_option("--threshold", peaks_threshold, "Score threshold in (0,1)")->capture_default_str();
    peaks_cmd->add_option("--max-faces", peaks_max, "Maximum number of peaks")->capture_default_str();
    peaks_cmd->add_option("--stride", peaks_stride, "Grid stride in pixels")->capture_default_str();
    peaks_cmd->add_option("--out", peaks_out, "CSV output (columns row,col,score,cx,cy); stdout if omitted");
    add_common(peaks_cmd, common);

    // eval-nme
    auto* nme_cmd = app.add_subcommand("eval-nme", "Per-face sparse and dense NME of a fitted scene");
    std::string nme_pred, nme_gt, nme_out;
    nme_cmd->add_option("--pred", nme_pred, "Fitted scene file")->required();
    nme_cmd->add_option("--gt", nme_gt, "Ground-truth scene file (faces matched by nearest center)")->required();
    nme_cmd->add_option("--out", nme_out, "CSV output (columns face,nme68,nme_dense,yaw_bucket); stdout if omitted");
    add_common(nme_cmd, common);

    // ced
    auto* ced_cmd = app.add_subcommand("ced", "Cumulative error distribution of NME values");
    std::string ced_errors, ced_out;
    double ced_lo = 0.0, ced_hi = 10.0;
    int ced_steps = 101;
    ced_cmd->add_option("--errors", ced_errors, "File with one error per line (first CSV column)")->required();
    ced_cmd->add_option("--lo", ced_lo, "Lowest threshold")->capture_default_str();
    ced_cmd->add_option("--hi", ced_hi, "Highest threshold")->capture_default_str();
    ced_cmd->add_option("--steps", ced_steps, "Number of thresholds")->capture_default_str();
    ced_cmd->add_option("--out", ced_out, "CSV output (columns threshold,fraction); stdout if omitted");
    add_common(ced_cmd, common);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Joint-scene versus per-face pipeline timing");
    std::vector<int> bench_sizes{1, 2, 5, 10};
    int bench_runs = 5, bench_w = 384, bench_h = 384;
    std::string bench_out;
    bench_cmd->add_option("--sizes", bench_sizes, "Scene sizes n")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--runs", bench_runs, "Repetitions per size (median is reported)")->capture_default_str();
    bench_cmd->add_option("--width", bench_w, "Image width")->capture_default_str();
    bench_cmd->add_option("--height", bench_h, "Image height")->capture_default_str();
    bench_cmd->add_option("--out", bench_out, "CSV output (columns n,t_joint,t_perface in seconds); stdout if omitted");
    add_common(bench_cmd, common);

    // export-obj
    auto* obj_cmd = app.add_subcommand("export-obj", "Export one face of a scene as a colored OBJ mesh");
    std::string obj_scene, obj_out = "face.obj";
    int obj_face = 0;
    obj_cmd->add_option("--scene", obj_scene, "Scene file")->required();
    obj_cmd->add_option("--face", obj_face, "Face index")->capture_default_str();
    obj_cmd->add_option("--out", obj_out, "Output .obj path")->capture_default_str();
    add_common(obj_cmd, common);

    try
    {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    } catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitValidation;
    }

    try
    {
        apply_threads(common);
        const Config cfg = load_config(common);

        if (*synth)
        {
            const auto bundle = load_bundle(common);
            const auto ss = eval::synth_scene(common.seed, synth_faces, synth_w, synth_h, bundle);
            fs::create_directories(synth_out);
            const fs::path dir(synth_out);
            io::write_image((dir / "image.png").string(), ss.image);
            io::write_mask((dir / "skin.png").string(), ss.skin);
            detect::write_heatmap((dir / "heatmap.pgm").string(), ss.heatmap);
            std::ofstream centers((dir / "centers.csv").string());
            for (std::size_t k = 0; k < ss.centers.size(); ++k)
            {
                io::write_landmarks((dir / ("landmarks_" + std::to_string(k) + ".txt")).string(), ss.landmarks[k]);
                centers << fitter::detail::format_double(ss.centers[k].x()) << ','
                        << fitter::detail::format_double(ss.centers[k].y()) << '\n';
            }
            fitter::write_scene((dir / "scene.txt").string(), ss.scene);
        } else if (*synth_bundle_cmd)
        {
            assets::save_bundle(assets::synth_bundle(common.seed, bundle_vertices), bundle_out);
        } else if (*fit)
        {
            const auto bundle = load_bundle(common);
            const auto fit_cfg = fitter::fit_config_from_config(cfg);
            fitter::FitInputs in;
            in.image = io::read_image(fit_image);
            in.skin = io::read_mask(fit_skin);
            for (const auto& path : fit_landmarks)
                in.landmarks.push_back(io::read_landmarks(path));
            detect::Heatmap hm;
            if (!fit_heatmap.empty())
            {
                hm = detect::read_heatmap(fit_heatmap, fit_cfg.stride);
                in.heatmap = &hm;
            } else if (!fit_centers.empty())
                in.centers = read_centers(fit_centers);
            else
                throw Error(ErrorKind::invalid_argument, "fit needs --heatmap or --centers");
            const auto intr = camera::Intrinsics::with_default_focal(in.image.width, in.image.height);
            try
            {
                const auto result = fitter::fit_multiface(in, intr, bundle, fit_cfg);
                fitter::write_scene(fit_out, result.scene);
                if (!fit_trace.empty())
                    fitter::write_trace(fit_trace, result.trace);
                const auto& b = result.breakdown;
                std::cerr << "faces " << result.scene.faces.size() << "  total " << b.total << "  pix " << b.pix
                          << "  lan " << b.lan << "\n";
            } catch (const fitter::DivergedError& e)
            {
                if (!fit_trace.empty())
                    fitter::write_trace(fit_trace, e.trace());
                throw;
            }
        } else if (*render)
        {
            const auto bundle = load_bundle(common);
            const auto scene = fitter::read_scene(render_scene_path);
            const auto out = raster::render_scene(scene, bundle);
            io::write_image(render_out, out.rgb);
            if (!render_mask.empty())
                io::write_mask(render_mask, out.mask);
            if (!render_depth.empty())
            {
                double near = std::numeric_limits<double>::infinity(), far = 0.0;
                for (double d : out.depth)
                    if (std::isfinite(d))
                    {
                        near = std::min(near, d);
                        far = std::max(far, d);
                    }
                Image depth(out.width, out.height, 1);
                for (std::size_t i = 0; i < out.depth.size(); ++i)
                    depth.data[i] = std::isfinite(out.depth[i]) && far > near ? (out.depth[i] - near) / (far - near) : 1.0;
                io::write_pgm(render_depth, depth, 16);
            }
        } else if (*peaks_cmd)
        {
            const auto hm = detect::read_heatmap(peaks_heatmap, peaks_stride);
            const auto peaks = detect::extract_peaks(hm, peaks_threshold, peaks_max);
            const auto centers = detect::peaks_to_face_centers(peaks, peaks_stride);
            std::ofstream file;
            auto& out = open_output(peaks_out, file);
            out << "row,col,score,cx,cy\n";
            for (std::size_t k = 0; k < peaks.size(); ++k)
                out << peaks[k].cell.row << ',' << peaks[k].cell.col << ',' << peaks[k].score << ',' << centers[k].x()
                    << ',' << centers[k].y() << '\n';
        } else if (*nme_cmd)
        {
            const auto bundle = load_bundle(common);
            const auto records = eval::evaluate_scene(fitter::read_scene(nme_pred), fitter::read_scene(nme_gt), bundle);
            std::ofstream file;
            auto& out = open_output(nme_out, file);
            out << "face,nme68,nme_dense,yaw_bucket\n";
            for (std::size_t k = 0; k < records.size(); ++k)
                out << k << ',' << records[k].nme68 << ',' << records[k].nme_dense << ','
                    << eval::yaw_bucket_name(records[k].yaw_bucket) << '\n';
        } else if (*ced_cmd)
        {
            const auto curve = eval::ced_curve(read_numbers(ced_errors), eval::threshold_grid(ced_lo, ced_hi, ced_steps));
            std::ofstream file;
            auto& out = open_output(ced_out, file);
            out << "threshold,fraction\n";
            for (const auto& [t, f] : curve)
                out << t << ',' << f << '\n';
        } else if (*bench_cmd)
        {
            const auto bundle = load_bundle(common);
            const auto rows = eval::bench_shared_decoder(bench_sizes, bundle, bench_w, bench_h, bench_runs, common.seed);
            std::ofstream file;
            auto& out = open_output(bench_out, file);
            out << "n,t_joint,t_perface\n";
            for (const auto& r : rows)
                out << r.n << ',' << r.t_joint << ',' << r.t_perface << '\n';
        } else if (*obj_cmd)
        {
            const auto bundle = load_bundle(common);
            const auto scene = fitter::read_scene(obj_scene);
            if (obj_face < 0 || static_cast<std::size_t>(obj_face) >= scene.faces.size())
                throw Error(ErrorKind::invalid_argument, "face index out of range");
            const auto& params = scene.faces[obj_face];
            const auto face = morphable::decode(params, bundle, scene.intr);
            morphable::write_obj(obj_out, face.shape_cam, raster::shade_vertices(face, params.illum), bundle.triangles);
        }
    } catch (const Error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::diverged ? kExitDiverged : kExitValidation;
    } catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
