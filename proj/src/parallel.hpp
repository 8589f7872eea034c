#pragma once

#include "bayeshield/core.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace bayeshield::detail {

inline unsigned resolve_threads(unsigned threads)
{
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  return threads;
}

//! Calls body(i) for i in [0, n). Work is split into contiguous blocks; the
//! body must only write state owned by index i.
template<class Body>
void parallel_for(Index n, unsigned threads, Body&& body)
{
  threads = resolve_threads(threads);
  if (threads <= 1 || n < 2) {
    for (Index i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  const Index workers = std::min<Index>(threads, n);
  const Index block = (n + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          const Index end = std::min(n, (w + 1) * block);
          for (Index i = w * block; i < end; ++i) {
            body(i);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

} // namespace bayeshield::detail
