#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <future>
#include <vector>

namespace infocir {

/// Runs fn(i) for i in [0, n) with at most `limit` calls in flight. Results are
/// returned in index order. The first exception (by index) is rethrown after
/// all in-flight work has finished, so partial results never escape.
template <typename Fn>
auto bounded_parallel_map(std::size_t n, std::size_t limit, Fn fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out;
  out.reserve(n);
  if (limit <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
  }
  std::exception_ptr first_error;
  for (std::size_t start = 0; start < n; start += limit) {
    const std::size_t end = std::min(n, start + limit);
    std::vector<std::future<R>> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : batch) {
      try {
        out.push_back(f.get());
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }
  return out;
}

}  // namespace infocir
