// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#include "subtq/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace subtq {

int thread_budget() {
    int budget = 1;
    if (const char* env = std::getenv("SUBTQ_THREADS")) {
        try {
            budget = std::max(1, std::stoi(env));
        } catch (...) {
            budget = 1;
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0) budget = std::min<int>(budget, static_cast<int>(hw));
    return budget;
}

void parallel_chunks(int64_t n, const std::function<void(int64_t, int64_t, int)>& fn) {
    int workers = std::min<int64_t>(thread_budget(), n);
    if (workers <= 1) {
        fn(0, n, 0);
        return;
    }
    std::vector<std::thread> threads;
    int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int64_t begin = w * chunk;
        int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace subtq
