// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace specquant {

/// Worker count: SPECQUANT_THREADS if set to a positive integer, otherwise
/// std::thread::hardware_concurrency().
std::size_t thread_count();

/// Calls body(i) for i in [0, n) using up to thread_count() threads. Each index
/// is visited exactly once; callers write only to slot i so results do not
/// depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace specquant
