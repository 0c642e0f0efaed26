#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evpose {

// One asynchronous camera event. Polarity is stored as -1/+1 only;
// 0/1-encoded inputs are remapped at parse time.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int64_t t = 0;  // microseconds
  std::int8_t p = 1;   // -1 or +1

  bool operator==(const Event&) const = default;
};

// Half-open window [t_start, t_end).
struct TimeWindow {
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  std::int64_t length() const { return t_end - t_start; }
  bool contains(std::int64_t t) const { return t >= t_start && t < t_end; }

  bool operator==(const TimeWindow&) const = default;
};

// Immutable after construction; events sorted by t, stable for equal t.
class EventStream {
 public:
  EventStream() = default;
  EventStream(int width, int height, std::vector<Event> events);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Event>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  std::size_t size() const { return events_.size(); }

 private:
  int width_ = 346;
  int height_ = 260;
  std::vector<Event> events_;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EventFormat { Csv, Binary };

// CSV rows `x,y,t,p`; binary packed little-endian u16 x, u16 y, i64 t, i8 p.
// With zero_one_polarity, input p in {0,1} is remapped to {-1,+1}.
EventStream parse_events(std::span<const std::uint8_t> bytes, EventFormat format,
                         int width, int height, bool zero_one_polarity = false);

std::vector<std::uint8_t> serialize_events(const EventStream& stream,
                                           EventFormat format);

EventStream load_events(const std::string& path, int width, int height,
                        bool zero_one_polarity = false);
void save_events(const EventStream& stream, const std::string& path);

// One window's worth of events, referencing the stream without copying.
struct WindowSpan {
  TimeWindow window;
  std::span<const Event> events;
};

// Consecutive fixed-duration windows covering [t_first, t_last]; every event
// lands in exactly one window. Empty stream gives an empty sequence.
std::vector<WindowSpan> window_iter(const EventStream& stream,
                                    std::int64_t window_us);

// Fixed-count windows of `count` events each (last window may be short); the
// time bounds are [first event t, last event t + 1).
std::vector<WindowSpan> window_by_count(const EventStream& stream,
                                        std::size_t count);

enum class SynthPattern { MovingBar, Random, TwoBlobs };

struct SynthSpec {
  SynthPattern pattern = SynthPattern::Random;
  double rate = 10000.0;  // events per second
  std::int64_t duration_us = 100000;
  std::uint64_t seed = 0;
  int width = 346;
  int height = 260;
};

SynthPattern parse_pattern(const std::string& name);

// Deterministic synthetic streams for tests and benchmarks. moving_bar emits
// events on a single-pixel-wide vertical bar sweeping left to right.
EventStream synth_events(const SynthSpec& spec);

// Column of the moving bar at time t (for checking against generated events).
int moving_bar_column(const SynthSpec& spec, std::int64_t t);

}  // namespace evpose
