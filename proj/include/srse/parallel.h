#pragma once

#include <cstdint>
#include <functional>

namespace srse {

// Worker count for ParallelFor. 1 (the default) runs inline.
void SetNumThreads(int n);
int NumThreads();

// Runs fn(i) for i in [0, count) using a static contiguous partition. Callers
// must make iterations independent; any reduction over i is done by the
// caller afterwards, in index order, so results do not depend on the thread
// count.
void ParallelFor(std::int64_t count, const std::function<void(std::int64_t)>& fn);

}  // namespace srse
