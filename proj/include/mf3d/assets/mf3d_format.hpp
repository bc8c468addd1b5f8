/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/assets/mf3d_format.hpp
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

#ifndef MF3D_ASSETS_MF3D_FORMAT_HPP
#define MF3D_ASSETS_MF3D_FORMAT_HPP

#include "mf3d/assets/bundle.hpp"
#include "mf3d/core/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

/*
 * MF3D binary layout (little-endian):
 *
 *   "MF3D" 0x01
 *   repeated records: tag[4] | count: uint64 | count x 4-byte elements
 *
 * Records are written in the fixed order below. Float fields are float32,
 * index fields uint32. A basis record of count 3N*K holds K planar columns one
 * after another. Unknown or repeated tags are rejected.
 */

namespace mf3d {
namespace assets {

inline constexpr std::array<char, 5> kMagic{'M', 'F', '3', 'D', '\x01'};

namespace detail {

enum class Payload { f32, u32 };

struct TagInfo
{
    const char* tag;
    const char* field;
    Payload payload;
};

inline constexpr std::array<TagInfo, 10> kTags{{
    {"NVTX", "vertex_count", Payload::u32},
    {"MSHP", "mean_shape", Payload::f32},
    {"MALB", "mean_albedo", Payload::f32},
    {"BIDN", "id_basis", Payload::f32},
    {"BEXP", "exp_basis", Payload::f32},
    {"BALB", "alb_basis", Payload::f32},
    {"TRIS", "triangles", Payload::u32},
    {"LMKS", "landmark_indices", Payload::u32},
    {"LMMN", "mouthnose_mask", Payload::u32},
    {"SKIN", "skin_region", Payload::u32},
}};

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p)
{
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::uint64_t get_u64(const std::uint8_t* p)
{
    return std::uint64_t(get_u32(p)) | (std::uint64_t(get_u32(p + 4)) << 32);
}

inline void put_header(std::vector<std::uint8_t>& out, const char* tag, std::uint64_t count)
{
    out.insert(out.end(), tag, tag + 4);
    put_u64(out, count);
}

template <typename Derived>
void put_floats(std::vector<std::uint8_t>& out, const char* tag, const Eigen::DenseBase<Derived>& values)
{
    put_header(out, tag, static_cast<std::uint64_t>(values.size()));
    // Column-major traversal keeps basis columns contiguous.
    for (Eigen::Index c = 0; c < values.cols(); ++c)
        for (Eigen::Index r = 0; r < values.rows(); ++r)
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(values(r, c))));
}

inline void put_indices(std::vector<std::uint8_t>& out, const char* tag, const std::vector<std::uint32_t>& values)
{
    put_header(out, tag, values.size());
    for (auto v : values)
        put_u32(out, v);
}

} /* namespace detail */

/// Canonical MF3D byte image of a bundle; values are rounded to float32.
inline std::vector<std::uint8_t> serialize_bundle(const BasisBundle& b)
{
    if (b.vertex_count() <= 0)
        throw Error(ErrorKind::invariant_violation, "vertex_count: bundle has no vertices");
    validate(b);
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    detail::put_indices(out, "NVTX", {static_cast<std::uint32_t>(b.vertex_count())});
    detail::put_floats(out, "MSHP", b.mean_shape);
    detail::put_floats(out, "MALB", b.mean_albedo);
    detail::put_floats(out, "BIDN", b.id_basis);
    detail::put_floats(out, "BEXP", b.exp_basis);
    detail::put_floats(out, "BALB", b.alb_basis);
    std::vector<std::uint32_t> tris;
    tris.reserve(b.triangles.size() * 3);
    for (const auto& t : b.triangles)
        tris.insert(tris.end(), t.begin(), t.end());
    detail::put_indices(out, "TRIS", tris);
    detail::put_indices(out, "LMKS", b.landmark_indices);
    std::vector<std::uint32_t> mn(b.mouthnose_mask.begin(), b.mouthnose_mask.end());
    detail::put_indices(out, "LMMN", mn);
    detail::put_indices(out, "SKIN", b.skin_region);
    return out;
}

/// Parses an MF3D byte image and validates the result.
inline BasisBundle parse_bundle(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin(),
                                                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
        throw Error(ErrorKind::bad_magic, "missing MF3D\\x01 header");

    std::map<std::string, std::vector<std::uint32_t>> records;
    std::size_t pos = kMagic.size();
    while (pos < bytes.size())
    {
        if (bytes.size() - pos < 12)
            throw Error(ErrorKind::truncated_payload, "record header cut short at byte " + std::to_string(pos));
        const std::string tag(reinterpret_cast<const char*>(&bytes[pos]), 4);
        const std::uint64_t count = detail::get_u64(&bytes[pos + 4]);
        pos += 12;
        const auto info = std::find_if(detail::kTags.begin(), detail::kTags.end(),
                                       [&](const detail::TagInfo& t) { return tag == t.tag; });
        if (info == detail::kTags.end())
            throw Error(ErrorKind::invariant_violation, "unknown record tag '" + tag + "'");
        if (records.count(tag))
            throw Error(ErrorKind::invariant_violation, std::string(info->field) + ": repeated record");
        if (count > (bytes.size() - pos) / 4)
            throw Error(ErrorKind::truncated_payload, std::string(info->field) + ": payload shorter than " +
                                                          std::to_string(count) + " elements");
        std::vector<std::uint32_t> words(count);
        for (std::uint64_t i = 0; i < count; ++i)
            words[i] = detail::get_u32(&bytes[pos + 4 * i]);
        pos += 4 * count;
        records.emplace(tag, std::move(words));
    }
    for (const auto& t : detail::kTags)
        if (!records.count(t.tag))
            throw Error(ErrorKind::truncated_payload, std::string(t.field) + ": record missing");

    auto fail = [](const char* field, const std::string& why) {
        throw Error(ErrorKind::invariant_violation, std::string(field) + ": " + why);
    };
    const auto& nv = records["NVTX"];
    if (nv.size() != 1 || nv[0] == 0)
        fail("vertex_count", "must be a single positive value");
    const Eigen::Index n3 = 3 * static_cast<Eigen::Index>(nv[0]);

    auto floats = [&](const char* tag, const char* field) {
        const auto& w = records[tag];
        if (w.size() % static_cast<std::size_t>(n3) != 0)
            fail(field, "element count is not a multiple of 3N");
        Eigen::MatrixXd m(n3, static_cast<Eigen::Index>(w.size()) / n3);
        for (std::size_t i = 0; i < w.size(); ++i)
            m.data()[i] = static_cast<double>(std::bit_cast<float>(w[i]));
        return m;
    };

    BasisBundle b;
    const Eigen::MatrixXd ms = floats("MSHP", "mean_shape");
    const Eigen::MatrixXd ma = floats("MALB", "mean_albedo");
    if (ms.cols() != 1)
        fail("mean_shape", "expected exactly 3N values");
    if (ma.cols() != 1)
        fail("mean_albedo", "expected exactly 3N values");
    b.mean_shape = ms.col(0);
    b.mean_albedo = ma.col(0);
    b.id_basis = floats("BIDN", "id_basis");
    b.exp_basis = floats("BEXP", "exp_basis");
    b.alb_basis = floats("BALB", "alb_basis");
    const auto& tris = records["TRIS"];
    if (tris.size() % 3 != 0)
        fail("triangles", "index count is not a multiple of 3");
    for (std::size_t i = 0; i < tris.size(); i += 3)
        b.triangles.push_back({tris[i], tris[i + 1], tris[i + 2]});
    b.landmark_indices = records["LMKS"];
    for (auto v : records["LMMN"])
    {
        if (v > 1)
            fail("mouthnose_mask", "entries must be 0 or 1");
        b.mouthnose_mask.push_back(v == 1);
    }
    b.skin_region = records["SKIN"];
    validate(b);
    return b;
}

inline void save_bundle(const BasisBundle& bundle, const std::string& path)
{
    const auto bytes = serialize_bundle(bundle);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorKind::io_failure, "write failed for '" + path + "'");
}

inline BasisBundle load_bundle(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_bundle(bytes);
}

/// FNV-1a 64-bit hash of the canonical serialization.
inline std::uint64_t bundle_checksum(const BasisBundle& bundle)
{
    std::uint64_t h = 1469598103934665603ull;
    for (auto byte : serialize_bundle(bundle))
    {
        h ^= byte;
        h *= 1099511628211ull;
    }
    return h;
}

} /* namespace assets */
} /* namespace mf3d */

#endif /* MF3D_ASSETS_MF3D_FORMAT_HPP */
