#pragma once

#include <functional>
#include <span>

// Deterministic parallel helpers. The thread budget comes from FBLAB_THREADS
// (clamped to the machine's parallelism); results never depend on how work was
// split across threads: every reduction uses indexed slots combined by a fixed
// pairwise tree.

namespace fblab {

// FBLAB_THREADS if set and valid, otherwise hardware_concurrency. At least 1.
int thread_budget();

// Runs task(0..count-1), possibly on several threads. Tasks must be
// independent; exceptions are rethrown on the calling thread.
void parallel_for(int count, const std::function<void(int)>& task);

// Pairwise tree sum; deterministic for a fixed slot order.
double pairwise_sum(std::span<const double> slots);

}  // namespace fblab
