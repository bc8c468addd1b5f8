/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: tests/test_assets.cpp
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

#include <fstream>
#include <map>

using namespace mf3d;
using namespace mf3d::assets;

namespace {

/// A four-vertex tetrahedron with random float-representable bases.
BasisBundle toy_bundle()
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    BasisBundle b;
    b.mean_shape.resize(12);
    b.mean_albedo.resize(12);
    for (int i = 0; i < 12; ++i)
    {
        b.mean_shape(i) = uni(rng);
        b.mean_albedo(i) = unit(rng);
    }
    auto random_matrix = [&](int cols) {
        Eigen::MatrixXd m(12, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < 12; ++r)
                m(r, c) = uni(rng);
        return m;
    };
    b.id_basis = random_matrix(kIdentityModes);
    b.exp_basis = random_matrix(kExpressionModes);
    b.alb_basis = random_matrix(kAlbedoModes);
    b.triangles = {{0, 1, 2}, {0, 3, 1}, {1, 3, 2}, {2, 3, 0}};
    for (int j = 0; j < kNumLandmarks; ++j)
        b.landmark_indices.push_back(static_cast<std::uint32_t>(j % 4));
    b.mouthnose_mask.assign(kNumLandmarks, false);
    for (int j = 27; j < 36; ++j)
        b.mouthnose_mask[j] = true;
    for (int j = 48; j < 68; ++j)
        b.mouthnose_mask[j] = true;
    b.skin_region = {0, 2, 3};
    return b;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ErrorKind kind_of(const std::function<void()>& fn)
{
    try
    {
        fn();
    } catch (const Error& e)
    {
        return e.kind();
    }
    FAIL("expected an mf3d::Error");
    return ErrorKind::invalid_argument;
}

/// Little-endian TLV record as the format defines it.
void append_record(std::vector<std::uint8_t>& out, const char* tag, const std::vector<std::uint32_t>& words)
{
    out.insert(out.end(), tag, tag + 4);
    const std::uint64_t count = words.size();
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(count >> (8 * i)));
    for (auto w : words)
        for (int i = 0; i < 4; ++i)
            out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
}

} // namespace

TEST_CASE("toy bundle round-trips bit-exactly")
{
    const auto dir = test::scratch_dir("assets_toy");
    const auto b = toy_bundle();
    REQUIRE_NOTHROW(validate(b));
    save_bundle(b, (dir / "toy.mf3d").string());
    const auto loaded = load_bundle((dir / "toy.mf3d").string());
    CHECK(loaded.vertex_count() == 4);
    CHECK(loaded == b);
    CHECK(bundle_checksum(loaded) == bundle_checksum(b));

    // Byte level: load then save reproduces the file.
    save_bundle(loaded, (dir / "again.mf3d").string());
    CHECK(read_bytes(dir / "toy.mf3d") == read_bytes(dir / "again.mf3d"));
}

TEST_CASE("file layout starts with the magic and a little-endian vertex-count record")
{
    const auto bytes = serialize_bundle(toy_bundle());
    REQUIRE(bytes.size() > 21);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MF3D");
    CHECK(bytes[4] == 0x01);
    CHECK(std::string(bytes.begin() + 5, bytes.begin() + 9) == "NVTX");
    CHECK(bytes[9] == 1);
    for (int i = 10; i < 17; ++i)
        CHECK(bytes[i] == 0);
    CHECK(bytes[17] == 4);
}

TEST_CASE("loader rejects malformed files and names the failing field")
{
    const auto dir = test::scratch_dir("assets_bad");
    const auto good = serialize_bundle(toy_bundle());

    auto bad_magic = good;
    bad_magic[0] = 'X';
    write_bytes(dir / "magic.mf3d", bad_magic);
    CHECK(kind_of([&] { load_bundle((dir / "magic.mf3d").string()); }) == ErrorKind::bad_magic);

    auto truncated = good;
    truncated.resize(good.size() - 7);
    write_bytes(dir / "trunc.mf3d", truncated);
    CHECK(kind_of([&] { load_bundle((dir / "trunc.mf3d").string()); }) == ErrorKind::truncated_payload);

    auto unknown = good;
    append_record(unknown, "XTRA", {1, 2, 3});
    CHECK(kind_of([&] { parse_bundle(unknown); }) == ErrorKind::invariant_violation);

    // Triangle index == N: rebuild the file with a corrupted triangle record.
    auto b = toy_bundle();
    b.triangles[2][1] = 4;
    CHECK(kind_of([&] { validate(b); }) == ErrorKind::invariant_violation);
    try
    {
        validate(b);
    } catch (const Error& e)
    {
        CHECK(std::string(e.what()).find("triangles") != std::string::npos);
    }
    {
        std::vector<std::uint8_t> bytes = good;
        // Locate the TRIS record and overwrite its first index with N.
        const std::string hay(bytes.begin(), bytes.end());
        const auto pos = hay.find("TRIS");
        REQUIRE(pos != std::string::npos);
        bytes[pos + 12] = 4;
        bytes[pos + 13] = bytes[pos + 14] = bytes[pos + 15] = 0;
        CHECK(kind_of([&] { parse_bundle(bytes); }) == ErrorKind::invariant_violation);
    }

    CHECK(kind_of([&] { load_bundle((dir / "missing.mf3d").string()); }) == ErrorKind::io_failure);
}

TEST_CASE("empty bundle is rejected before writing")
{
    const auto dir = test::scratch_dir("assets_empty");
    BasisBundle empty;
    CHECK_THROWS_AS(save_bundle(empty, (dir / "empty.mf3d").string()), Error);
    CHECK_FALSE(std::filesystem::exists(dir / "empty.mf3d"));
}

TEST_CASE("synth bundle is deterministic and seed dependent")
{
    const auto a = synth_bundle(1, 64);
    const auto b = synth_bundle(1, 64);
    CHECK(a == b);
    const auto c = synth_bundle(2, 64);
    CHECK(a.mean_shape != c.mean_shape);
    CHECK(a.vertex_count() == 64);
    CHECK(a.id_basis.cols() == kIdentityModes);
    CHECK(a.exp_basis.cols() == kExpressionModes);
    CHECK(a.alb_basis.cols() == kAlbedoModes);
    CHECK_THROWS_AS(synth_bundle(1, 3), Error);
}

TEST_CASE("synth bundle round-trips through the file format with equal checksums")
{
    const auto dir = test::scratch_dir("assets_synth");
    const auto b = synth_bundle(3, 500);
    save_bundle(b, (dir / "s.mf3d").string());
    const auto loaded = load_bundle((dir / "s.mf3d").string());
    CHECK(loaded == b);
    CHECK(bundle_checksum(loaded) == bundle_checksum(b));
    CHECK(bundle_checksum(synth_bundle(4, 500)) != bundle_checksum(b));
}

TEST_CASE("synth bundle basis columns are pairwise orthogonal")
{
    for (int n : {64, 500})
    {
        const auto b = synth_bundle(1, n);
        Eigen::MatrixXd shape(b.id_basis.rows(), b.id_basis.cols() + b.exp_basis.cols());
        shape << b.id_basis, b.exp_basis;
        for (const Eigen::MatrixXd* m : {static_cast<const Eigen::MatrixXd*>(&shape), &b.alb_basis})
        {
            const Eigen::MatrixXd gram = m->transpose() * *m;
            double worst = 0.0;
            for (Eigen::Index i = 0; i < gram.rows(); ++i)
                for (Eigen::Index j = 0; j < gram.cols(); ++j)
                    if (i != j)
                        worst = std::max(worst, std::abs(gram(i, j)));
            CHECK(worst < 1e-6);
        }
    }
}

TEST_CASE("synth bundle passes validation for 100 seeds")
{
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        const auto b = synth_bundle(seed, 80 + static_cast<int>(seed % 7) * 20);
        CHECK_NOTHROW(validate(b));
        CHECK(b.skin_region.size() > 0);
    }
}

TEST_CASE("synth bundle mesh is closed and outward oriented")
{
    const auto b = synth_bundle(5, 300);
    const VertexMatrix v = as_vertices(b.mean_shape);
    // Closed: every directed edge appears once and its reverse once.
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const auto& t : b.triangles)
        for (int i = 0; i < 3; ++i)
            ++edges[{t[i], t[(i + 1) % 3]}];
    for (const auto& [e, count] : edges)
    {
        CHECK(count == 1);
        CHECK(edges.count({e.second, e.first}) == 1);
    }
    // Euler characteristic of a sphere.
    CHECK(static_cast<long>(v.rows()) - static_cast<long>(edges.size() / 2) + static_cast<long>(b.triangles.size()) ==
          2);
    // Outward: signed volume positive.
    double volume = 0.0;
    for (const auto& t : b.triangles)
        volume += v.row(t[0]).dot(v.row(t[1]).cross(v.row(t[2]))) / 6.0;
    CHECK(volume > 0.0);
}

TEST_CASE("bounded coefficients do not flip triangles")
{
    const auto b = synth_bundle(7, 1000);
    const VertexMatrix mean = as_vertices(b.mean_shape);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    auto normal = [](const VertexMatrix& v, const Triangle& t) {
        return Eigen::Vector3d((v.row(t[1]) - v.row(t[0])).cross(v.row(t[2]) - v.row(t[0])));
    };
    for (int trial = 0; trial < 20; ++trial)
    {
        Eigen::VectorXd id(kIdentityModes), ex(kExpressionModes);
        for (auto* c : {&id, &ex})
            for (Eigen::Index i = 0; i < c->size(); ++i)
                (*c)(i) = uni(rng);
        const VertexMatrix deformed = as_vertices(b.mean_shape + b.id_basis * id + b.exp_basis * ex);
        int flipped = 0;
        for (const auto& t : b.triangles)
            if (normal(deformed, t).dot(normal(mean, t)) <= 0.0)
                ++flipped;
        CHECK(flipped == 0);
    }
}

TEST_CASE("planar storage helpers are inverse to each other")
{
    Eigen::VectorXd planar(6);
    planar << 1, 2, 3, 4, 5, 6; // x0 x1 y0 y1 z0 z1
    const VertexMatrix v = as_vertices(planar);
    CHECK(v(0, 0) == 1);
    CHECK(v(1, 0) == 2);
    CHECK(v(0, 1) == 3);
    CHECK(v(1, 2) == 6);
    CHECK(as_planar(v) == planar);
}
