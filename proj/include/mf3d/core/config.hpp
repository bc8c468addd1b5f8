/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/core/config.hpp
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

#ifndef MF3D_CORE_CONFIG_HPP
#define MF3D_CORE_CONFIG_HPP

#include "mf3d/core/error.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace mf3d {

/**
 * Flat key/value configuration read from a TOML-style text file:
 *
 *     # comment
 *     [loss]
 *     lambda_pix = 100
 *
 * Keys inside a [section] are stored as "section.key". Only scalar values
 * (numbers, booleans, bare or double-quoted strings) are supported.
 */
class Config
{
public:
    static Config parse(const std::string& text)
    {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            line = strip(strip_comment(line));
            if (line.empty())
                continue;
            if (line.front() == '[')
            {
                if (line.back() != ']')
                    throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(line_no) + ": bad section");
                section = strip(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(line_no) + ": expected key = value");
            const std::string key = strip(line.substr(0, eq));
            std::string value = strip(line.substr(eq + 1));
            if (key.empty())
                throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(line_no) + ": empty key");
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    static Config load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorKind::io_failure, "cannot open config '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    double get_double(const std::string& key, double fallback) const
    {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        double v = 0.0;
        const auto& s = it->second;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw Error(ErrorKind::invalid_argument, "config key '" + key + "' is not a number: " + s);
        return v;
    }

    int get_int(const std::string& key, int fallback) const
    {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        int v = 0;
        const auto& s = it->second;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw Error(ErrorKind::invalid_argument, "config key '" + key + "' is not an integer: " + s);
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const
    {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        if (it->second == "true" || it->second == "1")
            return true;
        if (it->second == "false" || it->second == "0")
            return false;
        throw Error(ErrorKind::invalid_argument, "config key '" + key + "' is not a boolean: " + it->second);
    }

    std::string get_string(const std::string& key, const std::string& fallback) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

private:
    static std::string strip(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::string strip_comment(const std::string& s)
    {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i)
        {
            if (s[i] == '"')
                quoted = !quoted;
            else if (s[i] == '#' && !quoted)
                return s.substr(0, i);
        }
        return s;
    }

    std::map<std::string, std::string> values_;
};

} /* namespace mf3d */

#endif /* MF3D_CORE_CONFIG_HPP */
