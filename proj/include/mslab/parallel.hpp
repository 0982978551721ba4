#ifndef MSLAB_PARALLEL_HPP
#define MSLAB_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace mslab {

/// Process-wide default worker count used when an options struct asks for 0.
void set_default_jobs(int jobs);
int default_jobs();

/// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace mslab

#endif  // MSLAB_PARALLEL_HPP
