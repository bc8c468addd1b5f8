/*
 * mf3d - multi-face 3D morphable model reconstruction.
 *
 * File: include/mf3d/core/parallel.hpp
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

#ifndef MF3D_CORE_PARALLEL_HPP
#define MF3D_CORE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mf3d {

namespace detail {
inline std::atomic<int>& thread_count_storage()
{
    static std::atomic<int> count{1};
    return count;
}
} /* namespace detail */

/// Number of worker threads used by parallel_for. Defaults to 1.
inline int num_threads() { return detail::thread_count_storage().load(); }

inline void set_num_threads(int n) { detail::thread_count_storage().store(std::max(1, n)); }

/**
 * Calls fn(i) exactly once for every i in [0, count). Work items must only
 * write to storage addressed by their own index; callers reduce afterwards in
 * index order, so results never depend on the thread count.
 */
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), count);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
    {
        pool.emplace_back([&, w]() {
            try
            {
                for (std::size_t i = w; i < count; i += workers)
                    fn(i);
            } catch (...)
            {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} /* namespace mf3d */

#endif /* MF3D_CORE_PARALLEL_HPP */
