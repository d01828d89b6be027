#pragma once

#include <cstddef>
#include <functional>

namespace bdpm {

/// Worker count: hardware concurrency, capped by the BDPM_THREADS env var.
int worker_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers write results into per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = worker_count());

/// Keeps large activation buffers on the heap instead of mapping and unmapping
/// them on every forward pass (glibc only; a no-op elsewhere). Meant to be
/// called once from main().
void tune_allocator();

/// Flushes subnormal floats to zero on the calling thread (x86 only). Long
/// runs otherwise drift into subnormal weights and Adam moments and slow down
/// several-fold. parallel_for workers inherit the caller's setting.
void flush_denormals();

/// Whether flush_denormals() is in effect on this thread.
bool denormals_flushed();

}  // namespace bdpm
