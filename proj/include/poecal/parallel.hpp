#pragma once

#include "poecal/core.hpp"

#include <functional>

namespace poecal {

/// Caps the number of worker threads used by parallel_for (0 = hardware).
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Each index writes only its own output slot,
/// so results do not depend on the worker count. If any body throws, the
/// exception from the lowest failing index is rethrown.
void parallel_for(Index n, const std::function<void(Index)>& body);

}  // namespace poecal
