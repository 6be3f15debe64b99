// Copyright (c) 2026 The subtq Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>

namespace subtq {

/// Worker count: min(hardware_concurrency, SUBTQ_THREADS). Defaults to 1 when
/// the variable is unset, keeping runs single-threaded and reproducible.
int thread_budget();

/// Runs fn(begin, end) over [0, n) partitioned across thread_budget() workers.
void parallel_chunks(int64_t n, const std::function<void(int64_t, int64_t, int)>& fn);

}  // namespace subtq
