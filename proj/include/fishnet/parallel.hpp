/*
   Copyright 2024 The fishnet authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fishnet {

/// Worker count from FISHNET_THREADS (0 or unset = hardware concurrency).
inline unsigned thread_count() {
    unsigned n = 0;
    if (const char* env = std::getenv("FISHNET_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/**
 * Runs fn(k) for k in [0, n) on up to `threads` workers. If any call throws,
 * the exception of the lowest failing index is rethrown after all workers stop,
 * so the reported failure does not depend on scheduling.
 */
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn, unsigned threads = thread_count()) {
    if (n <= 0) return;
    threads = static_cast<unsigned>(std::min<std::int64_t>(std::max(1u, threads), n));
    std::atomic<std::int64_t> next{0};
    std::mutex guard;
    std::int64_t failed_at = n;
    std::exception_ptr failure;

    auto worker = [&] {
        for (std::int64_t k = next++; k < n; k = next++) {
            try {
                fn(k);
            } catch (...) {
                std::lock_guard lock(guard);
                if (k < failed_at) {
                    failed_at = k;
                    failure = std::current_exception();
                }
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace fishnet
