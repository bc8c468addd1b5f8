/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/core/image_io.hpp
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

#ifndef MF3D_CORE_IMAGE_IO_HPP
#define MF3D_CORE_IMAGE_IO_HPP

#include "mf3d/core/error.hpp"
#include "mf3d/core/types.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace mf3d {
namespace io {

/// Quantizes a [0,1] value to 8 bits: round(clamp(v)*255).
inline std::uint8_t to_u8(double v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::uint16_t to_u16(double v)
{
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

namespace detail {

inline std::string lower_extension(const std::string& path)
{
    auto ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline void write_bytes(const std::string& path, const std::string& header, const std::vector<std::uint8_t>& payload)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out)
        throw Error(ErrorKind::io_failure, "write failed for '" + path + "'");
}

// Reads the next whitespace-separated header token, skipping '#' comments.
inline std::string netpbm_token(std::istream& in)
{
    std::string token;
    char c;
    while (in.get(c))
    {
        if (c == '#')
        {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c)))
        {
            if (!token.empty())
                break;
            continue;
        }
        token.push_back(c);
    }
    return token;
}

} /* namespace detail */

/// Binary PPM (P6, 8-bit). Output bytes depend only on the quantized pixels.
inline void write_ppm(const std::string& path, const Image& rgb)
{
    if (rgb.channels != 3)
        throw Error(ErrorKind::shape_mismatch, "PPM output needs 3 channels");
    std::vector<std::uint8_t> bytes(rgb.data.size());
    std::transform(rgb.data.begin(), rgb.data.end(), bytes.begin(), to_u8);
    const std::string header = "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n";
    detail::write_bytes(path, header, bytes);
}

/// Binary PGM (P5), 8-bit or 16-bit big-endian.
inline void write_pgm(const std::string& path, const Image& gray, int bits = 8)
{
    if (gray.channels != 1)
        throw Error(ErrorKind::shape_mismatch, "PGM output needs 1 channel");
    std::vector<std::uint8_t> bytes;
    if (bits == 16)
    {
        bytes.reserve(gray.data.size() * 2);
        for (double v : gray.data)
        {
            const auto q = to_u16(v);
            bytes.push_back(static_cast<std::uint8_t>(q >> 8));
            bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
        }
    } else
    {
        bytes.resize(gray.data.size());
        std::transform(gray.data.begin(), gray.data.end(), bytes.begin(), to_u8);
    }
    const std::string header = "P5\n" + std::to_string(gray.width) + " " + std::to_string(gray.height) + "\n" +
                               std::to_string(bits == 16 ? 65535 : 255) + "\n";
    detail::write_bytes(path, header, bytes);
}

/// Reads P5/P6 netpbm files; values are scaled to [0,1] by maxval.
inline Image read_netpbm(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    const auto magic = detail::netpbm_token(in);
    if (magic != "P5" && magic != "P6")
        throw Error(ErrorKind::bad_magic, "'" + path + "' is not a binary PGM/PPM file");
    const int width = std::stoi(detail::netpbm_token(in));
    const int height = std::stoi(detail::netpbm_token(in));
    const int maxval = std::stoi(detail::netpbm_token(in));
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw Error(ErrorKind::invariant_violation, "bad netpbm header in '" + path + "'");
    const int channels = magic == "P6" ? 3 : 1;
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    Image img(width, height, channels);
    std::vector<std::uint8_t> raw(img.data.size() * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw Error(ErrorKind::truncated_payload, "'" + path + "' pixel data is truncated");
    for (std::size_t i = 0; i < img.data.size(); ++i)
    {
        const unsigned v = bytes_per_sample == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        img.data[i] = static_cast<double>(v) / maxval;
    }
    return img;
}

/// 8-bit PNG, gray or RGB.
inline void write_png(const std::string& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3)
        throw Error(ErrorKind::shape_mismatch, "PNG output needs 1 or 3 channels");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info)
    {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::io_failure, "libpng initialisation failed");
    }
    std::vector<std::uint8_t> bytes(img.data.size());
    std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_u8);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = bytes.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::io_failure, "libpng failed writing '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads a PNG as 8-bit gray or RGB (alpha is dropped, palettes expanded).
inline Image read_png(const std::string& path)
{
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error(ErrorKind::bad_magic, "'" + path + "' is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info)
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::io_failure, "libpng initialisation failed");
    }
    Image img;
    std::vector<std::uint8_t> bytes;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::truncated_payload, "libpng failed reading '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    bytes.resize(static_cast<std::size_t>(width) * height * channels);
    rows.resize(height);
    for (int y = 0; y < height; ++y)
        rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    img = Image(width, height, channels);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.data[i] = bytes[i] / 255.0;
    return img;
}

/// Reads .ppm/.pgm/.png by extension.
inline Image read_image(const std::string& path)
{
    const auto ext = detail::lower_extension(path);
    if (ext == ".png")
        return read_png(path);
    return read_netpbm(path);
}

/// Writes RGB images as .ppm or .png by extension.
inline void write_image(const std::string& path, const Image& img)
{
    const auto ext = detail::lower_extension(path);
    if (ext == ".png")
        write_png(path, img);
    else if (img.channels == 1)
        write_pgm(path, img);
    else
        write_ppm(path, img);
}

/// Single-channel mask file: nonzero samples are true. RGB inputs use channel 0.
inline Mask read_mask(const std::string& path)
{
    const Image img = read_image(path);
    Mask mask(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            mask.set(x, y, img.at(x, y, 0) > 0.0);
    return mask;
}

inline void write_mask(const std::string& path, const Mask& mask)
{
    Image img(mask.width, mask.height, 1);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        img.data[i] = mask.data[i] ? 1.0 : 0.0;
    if (detail::lower_extension(path) == ".png")
        write_png(path, img);
    else
        write_pgm(path, img);
}

/// Landmark text file: 68 lines of "x y [visible]".
inline Landmarks read_landmarks(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "'");
    Landmarks lm;
    std::string line;
    int row = 0;
    while (std::getline(in, line))
    {
        if (line.empty() || line[0] == '#')
            continue;
        if (row >= kNumLandmarks)
            throw Error(ErrorKind::shape_mismatch, "'" + path + "' has more than 68 landmarks");
        std::istringstream fields(line);
        double x, y;
        if (!(fields >> x >> y))
            throw Error(ErrorKind::invariant_violation, "'" + path + "' line " + std::to_string(row + 1) + " is malformed");
        int vis = 1;
        fields >> vis;
        lm.points(row, 0) = x;
        lm.points(row, 1) = y;
        lm.visible[row] = vis != 0;
        ++row;
    }
    if (row != kNumLandmarks)
        throw Error(ErrorKind::shape_mismatch, "'" + path + "' has " + std::to_string(row) + " landmarks, expected 68");
    return lm;
}

inline void write_landmarks(const std::string& path, const Landmarks& lm)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::io_failure, "cannot open '" + path + "' for writing");
    out.precision(17);
    for (int j = 0; j < kNumLandmarks; ++j)
        out << lm.points(j, 0) << ' ' << lm.points(j, 1) << ' ' << (lm.visible[j] ? 1 : 0) << '\n';
}

} /* namespace io */
} /* namespace mf3d */

#endif /* MF3D_CORE_IMAGE_IO_HPP */
