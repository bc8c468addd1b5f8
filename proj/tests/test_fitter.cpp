/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: tests/test_fitter.cpp
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
#include "test_support.hpp"

#include "catch_amalgamated.hpp"

#include <sstream>

using namespace mf3d;
using namespace mf3d::fitter;

namespace {

bool same_scene(const Scene& a, const Scene& b)
{
    if (a.faces.size() != b.faces.size() || a.intr.focal != b.intr.focal || a.intr.width != b.intr.width ||
        a.intr.height != b.intr.height)
        return false;
    for (std::size_t k = 0; k < a.faces.size(); ++k)
        if (a.faces[k].to_vector() != b.faces[k].to_vector() || a.faces[k].pose.face_center != b.faces[k].pose.face_center)
            return false;
    return true;
}

Landmarks landmarks_of(const Scene& scene, std::size_t k, const assets::BasisBundle& bundle)
{
    Landmarks lm;
    lm.points = eval::project_scene(scene, bundle).landmarks[k];
    return lm;
}

/// The fitting schedule used for recovery checks (see README).
FitConfig recovery_config()
{
    FitConfig cfg;
    cfg.stage2_iters = 1500;
    cfg.step_size = 0.03;
    cfg.pose_step_scale = 3.333;
    return cfg;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const Eigen::VectorXd x = a.array() - a.mean();
    const Eigen::VectorXd y = b.array() - b.mean();
    return x.dot(y) / (x.norm() * y.norm());
}

Eigen::VectorXd coefficients(const morphable::FaceParams& f)
{
    Eigen::VectorXd v(f.id.size() + f.exp.size() + f.alb.size());
    v << f.id, f.exp, f.alb;
    return v;
}

/// Two faces with synthetic coefficients side by side in a 2:1 frame, so their supports are disjoint.
Scene side_by_side(const assets::BasisBundle& bundle, std::uint64_t seed, int height)
{
    Scene s;
    s.intr = camera::Intrinsics::with_default_focal(2 * height, height);
    for (int k = 0; k < 2; ++k)
    {
        auto face = eval::synth_scene(seed * 10 + k, 1, height, height, bundle).scene.faces[0];
        face.pose.face_center = Eigen::Vector2d(height * (0.5 + k), height * 0.5);
        face.pose.trans_code.x() = 0.0;
        face.pose.trans_code.y() = 0.0;
        s.faces.push_back(face);
    }
    return s;
}

} // namespace

TEST_CASE("fit configuration defaults and parsing")
{
    const FitConfig d;
    CHECK(d.stage1_iters == 300);
    CHECK(d.stage2_iters == 500);
    CHECK(d.step_size == 0.01);
    CHECK(d.decay_at == 0.75);
    CHECK(d.decay_factor == 0.1);
    CHECK(d.convergence_tol == 1e-6);
    CHECK(d.convergence_window == 20);
    CHECK(d.pose_step_scale == 10.0);
    CHECK(d.min_depth == 0.05);

    const auto cfg = fit_config_from_config(
        Config::parse("[fit]\nstage1_iters = 10\nstep_size = 0.5\n[detect]\nthreshold = 0.4\n[loss]\nlambda_pix = 7\n"));
    CHECK(cfg.stage1_iters == 10);
    CHECK(cfg.stage2_iters == 500);
    CHECK(cfg.step_size == 0.5);
    CHECK(cfg.peak_threshold == 0.4);
    CHECK(cfg.weights.lambda_pix == 7.0);

    CHECK_THROWS_AS(fit_config_from_config(Config::parse("[fit]\nstage2_iters = -1\n")), Error);
    CHECK_THROWS_AS(fit_config_from_config(Config::parse("[fit]\nstep_size = 0\n")), Error);
    CHECK_THROWS_AS(fit_config_from_config(Config::parse("[fit]\nstep_size = fast\n")), Error);
}

TEST_CASE("initial scene")
{
    const auto& bundle = test::bundle400();
    const auto intr = camera::Intrinsics::with_default_focal(256, 256);

    CHECK(init_scene({}, nullptr, intr, bundle).faces.empty());

    const auto s = init_scene({{128.0, 128.0}}, nullptr, intr, bundle);
    REQUIRE(s.faces.size() == 1);
    const auto& f = s.faces[0];
    CHECK(f.id.isZero());
    CHECK(f.exp.isZero());
    CHECK(f.alb.isZero());
    CHECK(f.pose.rot.isZero());
    CHECK(f.pose.trans_code == Eigen::Vector3d(0.0, 0.0, 20.0));
    CHECK(f.illum(0, 0) > 0.0);
    const Eigen::Vector2d centroid = landmarks_of(s, 0, bundle).points.colwise().mean().transpose();
    CHECK((centroid - Eigen::Vector2d(128.0, 128.0)).norm() < 1.0);

    // Scaling the observed landmarks about their centroid by 2 halves the depth.
    Landmarks base = landmarks_of(s, 0, bundle);
    Landmarks twice = base;
    const Eigen::RowVector2d mean = base.points.colwise().mean();
    twice.points = (base.points.rowwise() - mean) * 2.0;
    twice.points.rowwise() += mean;
    const std::vector<Landmarks> one{base}, two{twice};
    const double d1 = init_scene({{128.0, 128.0}}, &one, intr, bundle).faces[0].pose.trans_code.z();
    const double d2 = init_scene({{128.0, 128.0}}, &two, intr, bundle).faces[0].pose.trans_code.z();
    CHECK(d1 == Catch::Approx(20.0).epsilon(1e-9));
    CHECK(std::abs(d2 / d1 - 0.5) < 0.025);

    try
    {
        init_scene({{300.0, 10.0}}, nullptr, intr, bundle);
        FAIL("expected out_of_frame");
    } catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::out_of_frame);
    }
    CHECK_THROWS_AS(init_scene({{10.0, 10.0}, {20.0, 20.0}}, &one, intr, bundle), Error);
}

TEST_CASE("zero iterations leave the scene unchanged")
{
    const auto& bundle = test::bundle64();
    auto p = test::fd_problem(bundle, 1, 2, 64);
    FitConfig cfg;
    std::vector<TraceRow> trace;
    const auto out = fit_stage(p.scene, bundle, p.obs, p.opt.active, cfg, 0, trace);
    CHECK(same_scene(out, p.scene));
    CHECK(trace.size() == 1);
}

TEST_CASE("pose-only fit recovers rotation and depth from landmarks")
{
    const auto& bundle = test::bundle400();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> angle(-0.35, 0.35), depth(16.0, 26.0);
    for (int trial = 0; trial < 3; ++trial)
    {
        Scene gt;
        gt.intr = camera::Intrinsics::with_default_focal(192, 192);
        auto face = morphable::FaceParams::mean_face(bundle, depth(rng), {96.0, 96.0});
        face.pose.rot = Eigen::Vector3d(angle(rng) * 0.5, angle(rng), angle(rng) * 0.3);
        gt.faces.push_back(face);

        losses::Observations obs;
        obs.landmarks = {landmarks_of(gt, 0, bundle)};
        Scene start = init_scene({{96.0, 96.0}}, &obs.landmarks, gt.intr, bundle);
        FitConfig cfg;
        cfg.free = {true, false, false, false, false};
        std::vector<TraceRow> trace;
        const auto fit = fit_stage(start, bundle, obs, {false, false, false, true, false}, cfg, 600, trace);

        const auto& got = fit.faces[0].pose;
        const double err_deg = camera::geodesic_angle(camera::rotation_from_axis_angle(got.rot),
                                                      camera::rotation_from_axis_angle(face.pose.rot)) *
                               180.0 / std::numbers::pi;
        INFO("trial " << trial << " rotation error " << err_deg << " deg");
        CHECK(err_deg < 1.0);
        CHECK(std::abs(got.trans_code.z() / face.pose.trans_code.z() - 1.0) < 0.02);
        CHECK(fit.faces[0].id.isZero());
        CHECK(trace.back().loss.total <= trace.front().loss.total);
    }
}

TEST_CASE("a stage never returns a scene worse than its start")
{
    const auto& bundle = test::bundle64();
    for (std::uint64_t seed = 0; seed < 4; ++seed)
    {
        auto p = test::fd_problem(bundle, 50 + seed, 1 + static_cast<int>(seed % 2), 64);
        FitConfig cfg;
        cfg.step_size = 0.05;
        std::vector<TraceRow> trace;
        const auto out = fit_stage(p.scene, bundle, p.obs, p.opt.active, cfg, 40, trace);
        losses::LossOptions opt = p.opt;
        opt.gradients = false;
        const double final_total = losses::total_loss(out, bundle, p.obs, cfg.weights, opt).breakdown.total;
        CHECK(final_total <= trace.front().loss.total);
        for (std::size_t i = 0; i < trace.size(); ++i)
            CHECK(trace[i].iter == static_cast<int>(i));
    }
}

TEST_CASE("fit errors")
{
    const auto& bundle = test::bundle64();
    const auto synth = eval::synth_scene(4, 1, 64, 64, bundle);
    FitInputs in;
    in.image = synth.image;
    in.skin = synth.skin;
    in.landmarks = synth.landmarks;
    FitConfig cfg;
    cfg.stage1_iters = 5;
    cfg.stage2_iters = 5;

    detect::Heatmap empty = detect::Heatmap::for_image(64, 64);
    in.heatmap = &empty;
    try
    {
        fit_multiface(in, synth.scene.intr, bundle, cfg);
        FAIL("expected no_faces_found");
    } catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::no_faces_found);
    }

    in.heatmap = nullptr;
    in.centers = synth.centers;
    for (std::size_t i = 0; i < in.skin.data.size(); ++i)
        if (in.skin.data[i])
            in.image.data[3 * i] = std::numeric_limits<double>::quiet_NaN();
    try
    {
        fit_multiface(in, synth.scene.intr, bundle, cfg);
        FAIL("expected diverged");
    } catch (const DivergedError& e)
    {
        CHECK(e.kind() == ErrorKind::diverged);
        REQUIRE_FALSE(e.trace().empty());
        CHECK_FALSE(std::isfinite(e.trace().back().loss.total));
    }
}

TEST_CASE("scene and trace files")
{
    const auto& bundle = test::bundle64();
    auto p = test::fd_problem(bundle, 3, 3, 64);
    p.scene.faces[1].pose.trans_code.z() = 1.0 / 3.0;
    const auto dir = test::scratch_dir("fitter");
    write_scene((dir / "scene.txt").string(), p.scene);
    const auto back = read_scene((dir / "scene.txt").string(), 80, 64, 80);
    CHECK(same_scene(back, p.scene));

    std::ostringstream text;
    write_scene(text, p.scene);
    std::istringstream lines(text.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line))
    {
        std::istringstream fields(line);
        int n = 0;
        std::string tok;
        while (fields >> tok)
            ++n;
        CHECK(n == (count == 0 ? 3 : 260));
        ++count;
    }
    CHECK(count == 4);

    std::istringstream bad("224 224\n");
    CHECK_THROWS_AS(read_scene(bad), Error);
    std::istringstream short_line("1015 224 224\n1 2 3\n");
    CHECK_THROWS_AS(read_scene(short_line), Error);

    std::vector<TraceRow> trace{{0, {0.5, 0.25, 0.125, 4.0, 8.0, 0.75, 0.0, 1.5}}, {1, {}}};
    std::ostringstream csv;
    write_trace(csv, trace);
    CHECK(csv.str().rfind("iter,c,pix,per,lan,norm,var,total\n0,0.5,0.25,0.125,4,8,0.75,1.5\n1,", 0) == 0);
}

TEST_CASE("fitting is deterministic across runs and thread counts")
{
    const auto& bundle = test::bundle64();
    const auto synth = eval::synth_scene(5, 2, 96, 96, bundle);
    FitInputs in;
    in.image = synth.image;
    in.skin = synth.skin;
    in.landmarks = synth.landmarks;
    in.heatmap = &synth.heatmap;
    FitConfig cfg;
    cfg.stage1_iters = 15;
    cfg.stage2_iters = 15;
    const int saved = num_threads();
    std::vector<FitResult> runs;
    for (int threads : {1, 4, 4})
    {
        set_num_threads(threads);
        runs.push_back(fit_multiface(in, synth.scene.intr, bundle, cfg));
    }
    set_num_threads(saved);
    for (std::size_t i = 1; i < runs.size(); ++i)
    {
        CHECK(same_scene(runs[i].scene, runs[0].scene));
        CHECK(runs[i].breakdown.total == runs[0].breakdown.total);
        REQUIRE(runs[i].trace.size() == runs[0].trace.size());
    }
}

TEST_CASE("two disjoint faces fitted jointly match separate fits", "[slow]")
{
    const auto& bundle = test::bundle400();
    const Scene gt = side_by_side(bundle, 1, 96);
    const auto render = raster::render_scene(gt, bundle);
    FitInputs in;
    in.image = render.rgb;
    in.skin = render.mask;
    for (std::size_t k = 0; k < 2; ++k)
    {
        in.centers.push_back(gt.faces[k].pose.face_center);
        in.landmarks.push_back(landmarks_of(gt, k, bundle));
    }
    const auto cfg = recovery_config();
    const auto joint = fit_multiface(in, gt.intr, bundle, cfg);
    const auto records = eval::evaluate_scene(joint.scene, gt, bundle);

    for (std::size_t k = 0; k < 2; ++k)
    {
        Scene one;
        one.intr = gt.intr;
        one.faces = {gt.faces[k]};
        const auto r = raster::render_scene(one, bundle);
        FitInputs alone;
        alone.image = r.rgb;
        alone.skin = r.mask;
        alone.centers = {in.centers[k]};
        alone.landmarks = {in.landmarks[k]};
        const auto single = fit_multiface(alone, gt.intr, bundle, cfg);
        const double nme_alone = eval::evaluate_scene(single.scene, one, bundle)[0].nme68;
        INFO("face " << k << " joint " << records[k].nme68 << " alone " << nme_alone);
        CHECK(std::abs(records[k].nme68 - nme_alone) < 0.1);

        // Centers stay fixed, and the fitted landmarks stay anchored to them.
        CHECK(joint.scene.faces[k].pose.face_center == gt.faces[k].pose.face_center);
        const Eigen::Vector2d centroid = landmarks_of(joint.scene, k, bundle).points.colwise().mean().transpose();
        CHECK((centroid - in.centers[k]).norm() < 8.0);
    }
}

TEST_CASE("two-face identity recovery reaches correlation 0.9", "[slow][!mayfail]")
{
    // Known shortfall: single-image fits under the default coefficient prior
    // recover coefficient vectors with correlation of about 0.7 to 0.88.
    const auto& bundle = test::bundle400();
    const Scene gt = side_by_side(bundle, 1, 96);
    const auto render = raster::render_scene(gt, bundle);
    FitInputs in;
    in.image = render.rgb;
    in.skin = render.mask;
    for (std::size_t k = 0; k < 2; ++k)
    {
        in.centers.push_back(gt.faces[k].pose.face_center);
        in.landmarks.push_back(landmarks_of(gt, k, bundle));
    }
    const auto joint = fit_multiface(in, gt.intr, bundle, recovery_config());
    for (std::size_t k = 0; k < 2; ++k)
    {
        const double r = correlation(coefficients(joint.scene.faces[k]), coefficients(gt.faces[k]));
        INFO("face " << k << " coefficient correlation " << r);
        CHECK(r > 0.9);
    }
}
