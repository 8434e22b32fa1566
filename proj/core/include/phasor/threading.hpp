#pragma once

#include <cstddef>

namespace phasor {

// Worker count for row-parallel loops. Default 1 (fully sequential).
// Parallel splits are always by output row, so results are bit-identical
// for any thread count: each row's reduction runs in a fixed order.
void set_num_threads(int n);
int num_threads();

namespace detail {

// Runs fn(begin, end) over disjoint chunks of [0, total).
void parallel_for_impl(std::size_t total, void* ctx, void (*fn)(void*, std::size_t, std::size_t));

}  // namespace detail

template <typename Fn>
void parallel_for(std::size_t total, Fn&& fn) {
  auto trampoline = [](void* ctx, std::size_t b, std::size_t e) {
    (*static_cast<Fn*>(ctx))(b, e);
  };
  detail::parallel_for_impl(total, &fn, trampoline);
}

}  // namespace phasor
