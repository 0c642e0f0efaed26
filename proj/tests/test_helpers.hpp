#pragma once

#include <vector>

#include "evpose/events.hpp"
#include "evpose/raster.hpp"
#include "evpose/rng.hpp"

namespace evpose::testing {

inline EventStream random_stream(Rng& rng, std::size_t n, int width = 64,
                                 int height = 48,
                                 std::int64_t t_max = 100000) {
  std::vector<Event> events;
  events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Event e;
    e.x = static_cast<std::uint16_t>(rng.next_below(width));
    e.y = static_cast<std::uint16_t>(rng.next_below(height));
    e.t = static_cast<std::int64_t>(rng.next_below(t_max));
    e.p = rng.next_u64() & 1 ? 1 : -1;
    events.push_back(e);
  }
  return EventStream(width, height, std::move(events));
}

// naive per-event accumulation, the oracle for rasterize
inline VoxelGrid naive_rasterize(std::span<const Event> events,
                                 TimeWindow window, int width, int height,
                                 int k) {
  VoxelGrid grid(width, height, k, window);
  const std::int64_t len = window.length();
  for (const Event& e : events) {
    std::int64_t idx = k * (e.t - window.t_start) / len;
    if (idx < 0) idx = 0;
    if (idx > k - 1) idx = k - 1;
    VoxelCell& cell = grid.at(static_cast<int>(idx), e.y, e.x);
    cell.t_sum += e.t - window.t_start;
    cell.p_acc += e.p;
    cell.e_cnt += 1;
  }
  return grid;
}

}  // namespace evpose::testing
