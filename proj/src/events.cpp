#include "evpose/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "evpose/rng.hpp"

namespace evpose {

namespace {

void check_bounds(const Event& e, int width, int height, std::size_t record) {
  if (e.x >= width || e.y >= height) {
    throw ParseError("record " + std::to_string(record) + ": pixel (" +
                     std::to_string(e.x) + "," + std::to_string(e.y) +
                     ") outside " + std::to_string(width) + "x" +
                     std::to_string(height) + " sensor");
  }
}

std::int8_t decode_polarity(long long raw, bool zero_one, std::size_t record) {
  if (zero_one) {
    if (raw == 0) return -1;
    if (raw == 1) return 1;
  } else {
    if (raw == -1) return -1;
    if (raw == 1) return 1;
  }
  throw ParseError("record " + std::to_string(record) + ": polarity " +
                   std::to_string(raw) + " not in " +
                   (zero_one ? std::string("{0,1}") : std::string("{-1,+1}")));
}

long long parse_int_field(std::string_view field, std::size_t line_no) {
  long long value = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" +
                     std::string(field) + "'");
  }
  return value;
}

std::vector<Event> parse_csv(std::span<const std::uint8_t> bytes,
                             int width, int height, bool zero_one) {
  std::vector<Event> events;
  std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                        bytes.size());
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    // optional header
    if (line_no == 1 && line.find_first_not_of("xytp, _avheader") ==
                            std::string_view::npos &&
        line.find_first_of("0123456789-") == std::string_view::npos) {
      continue;
    }
    long long fields[4];
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      std::size_t comma = line.find(',', start);
      if ((f < 3) != (comma != std::string_view::npos)) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected 4 comma-separated fields");
      }
      std::string_view field = line.substr(
          start, comma == std::string_view::npos ? std::string_view::npos
                                                 : comma - start);
      fields[f] = parse_int_field(field, line_no);
      start = comma + 1;
    }
    if (fields[0] < 0 || fields[1] < 0 || fields[2] < 0) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": negative coordinate or timestamp");
    }
    Event e{static_cast<std::uint16_t>(fields[0]),
            static_cast<std::uint16_t>(fields[1]), fields[2],
            decode_polarity(fields[3], zero_one, line_no)};
    if (fields[0] > 0xffff || fields[1] > 0xffff) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": coordinate exceeds 16 bits");
    }
    check_bounds(e, width, height, line_no);
    events.push_back(e);
  }
  return events;
}

constexpr std::size_t kBinRecordSize = 2 + 2 + 8 + 1;

std::vector<Event> parse_bin(std::span<const std::uint8_t> bytes,
                             int width, int height, bool zero_one) {
  if (bytes.size() % kBinRecordSize != 0) {
    throw ParseError("binary input truncated at offset " +
                     std::to_string(bytes.size() -
                                    bytes.size() % kBinRecordSize));
  }
  std::vector<Event> events;
  events.reserve(bytes.size() / kBinRecordSize);
  for (std::size_t off = 0; off < bytes.size(); off += kBinRecordSize) {
    const std::uint8_t* r = bytes.data() + off;
    Event e;
    e.x = static_cast<std::uint16_t>(r[0] | (r[1] << 8));
    e.y = static_cast<std::uint16_t>(r[2] | (r[3] << 8));
    std::uint64_t t = 0;
    for (int i = 0; i < 8; ++i) t |= static_cast<std::uint64_t>(r[4 + i]) << (8 * i);
    e.t = static_cast<std::int64_t>(t);
    if (e.t < 0) {
      throw ParseError("record at offset " + std::to_string(off) +
                       ": negative timestamp");
    }
    e.p = decode_polarity(static_cast<std::int8_t>(r[12]), zero_one,
                          off / kBinRecordSize + 1);
    check_bounds(e, width, height, off / kBinRecordSize + 1);
    events.push_back(e);
  }
  return events;
}

}  // namespace

EventStream::EventStream(int width, int height, std::vector<Event> events)
    : width_(width), height_(height), events_(std::move(events)) {
  if (width_ <= 0 || height_ <= 0) {
    throw std::invalid_argument("sensor dimensions must be positive");
  }
  // real recordings are near-sorted; stable_sort is adaptive enough here and
  // preserves input order for equal timestamps
  if (!std::is_sorted(events_.begin(), events_.end(),
                      [](const Event& a, const Event& b) { return a.t < b.t; })) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
  }
}

EventStream parse_events(std::span<const std::uint8_t> bytes, EventFormat format,
                         int width, int height, bool zero_one_polarity) {
  std::vector<Event> events =
      format == EventFormat::Csv
          ? parse_csv(bytes, width, height, zero_one_polarity)
          : parse_bin(bytes, width, height, zero_one_polarity);
  return EventStream(width, height, std::move(events));
}

std::vector<std::uint8_t> serialize_events(const EventStream& stream,
                                           EventFormat format) {
  std::vector<std::uint8_t> out;
  if (format == EventFormat::Csv) {
    std::string text = "x,y,t,p\n";
    for (const Event& e : stream.events()) {
      text += std::to_string(e.x) + ',' + std::to_string(e.y) + ',' +
              std::to_string(e.t) + ',' + std::to_string(int(e.p)) + '\n';
    }
    out.assign(text.begin(), text.end());
  } else {
    out.reserve(stream.size() * kBinRecordSize);
    for (const Event& e : stream.events()) {
      out.push_back(e.x & 0xff);
      out.push_back(e.x >> 8);
      out.push_back(e.y & 0xff);
      out.push_back(e.y >> 8);
      std::uint64_t t = static_cast<std::uint64_t>(e.t);
      for (int i = 0; i < 8; ++i) out.push_back((t >> (8 * i)) & 0xff);
      out.push_back(static_cast<std::uint8_t>(e.p));
    }
  }
  return out;
}

EventStream load_events(const std::string& path, int width, int height,
                        bool zero_one_polarity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  EventFormat format = path.size() >= 4 && path.ends_with(".evb")
                           ? EventFormat::Binary
                           : EventFormat::Csv;
  return parse_events(bytes, format, width, height, zero_one_polarity);
}

void save_events(const EventStream& stream, const std::string& path) {
  EventFormat format = path.ends_with(".evb") ? EventFormat::Binary
                                              : EventFormat::Csv;
  auto bytes = serialize_events(stream, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<WindowSpan> window_iter(const EventStream& stream,
                                    std::int64_t window_us) {
  if (window_us <= 0) throw std::invalid_argument("window_us must be positive");
  std::vector<WindowSpan> out;
  const auto& events = stream.events();
  if (events.empty()) return out;
  const std::int64_t t_first = events.front().t;
  const std::int64_t t_last = events.back().t;
  std::size_t idx = 0;
  for (std::int64_t start = t_first; start <= t_last; start += window_us) {
    TimeWindow w{start, start + window_us};
    std::size_t begin = idx;
    while (idx < events.size() && events[idx].t < w.t_end) ++idx;
    out.push_back({w, std::span<const Event>(events.data() + begin, idx - begin)});
  }
  return out;
}

std::vector<WindowSpan> window_by_count(const EventStream& stream,
                                        std::size_t count) {
  if (count == 0) throw std::invalid_argument("count must be positive");
  std::vector<WindowSpan> out;
  const auto& events = stream.events();
  for (std::size_t begin = 0; begin < events.size(); begin += count) {
    std::size_t n = std::min(count, events.size() - begin);
    TimeWindow w{events[begin].t, events[begin + n - 1].t + 1};
    out.push_back({w, std::span<const Event>(events.data() + begin, n)});
  }
  return out;
}

SynthPattern parse_pattern(const std::string& name) {
  if (name == "moving_bar") return SynthPattern::MovingBar;
  if (name == "random") return SynthPattern::Random;
  if (name == "two_blobs") return SynthPattern::TwoBlobs;
  throw std::invalid_argument("unknown pattern '" + name + "'");
}

int moving_bar_column(const SynthSpec& spec, std::int64_t t) {
  // constant-velocity sweep across the full width over the duration
  double frac = static_cast<double>(t) / static_cast<double>(spec.duration_us);
  int c = static_cast<int>(frac * spec.width);
  return std::clamp(c, 0, spec.width - 1);
}

EventStream synth_events(const SynthSpec& spec) {
  if (spec.rate <= 0) throw std::invalid_argument("rate must be positive");
  if (spec.duration_us <= 0) {
    throw std::invalid_argument("duration_us must be positive");
  }
  const auto total = static_cast<std::size_t>(
      spec.rate * static_cast<double>(spec.duration_us) / 1e6);
  Rng rng(spec.seed);
  std::vector<Event> events;
  events.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    // deterministic spacing: timestamps on a fixed lattice, count exact
    auto t = static_cast<std::int64_t>(
        static_cast<double>(i) * spec.duration_us / static_cast<double>(total));
    Event e;
    e.t = t;
    switch (spec.pattern) {
      case SynthPattern::Random:
        e.x = static_cast<std::uint16_t>(rng.next_below(spec.width));
        e.y = static_cast<std::uint16_t>(rng.next_below(spec.height));
        e.p = rng.next_u64() & 1 ? 1 : -1;
        break;
      case SynthPattern::MovingBar:
        e.x = static_cast<std::uint16_t>(moving_bar_column(spec, t));
        e.y = static_cast<std::uint16_t>(rng.next_below(spec.height));
        e.p = 1;  // rising edge of the bar
        break;
      case SynthPattern::TwoBlobs: {
        bool second = rng.next_u64() & 1;
        double cx = (second ? 0.75 : 0.25) * spec.width;
        double cy = 0.5 * spec.height;
        double sigma = 0.05 * std::min(spec.width, spec.height);
        // Box-Muller from the deterministic stream
        double u1 = rng.next_double();
        double u2 = rng.next_double();
        double r = std::sqrt(-2.0 * std::log(u1 + 1e-300));
        double gx = r * std::cos(6.283185307179586 * u2);
        double gy = r * std::sin(6.283185307179586 * u2);
        auto px = static_cast<long>(cx + sigma * gx);
        auto py = static_cast<long>(cy + sigma * gy);
        e.x = static_cast<std::uint16_t>(std::clamp<long>(px, 0, spec.width - 1));
        e.y = static_cast<std::uint16_t>(std::clamp<long>(py, 0, spec.height - 1));
        e.p = second ? 1 : -1;
        break;
      }
    }
    events.push_back(e);
  }
  return EventStream(spec.width, spec.height, std::move(events));
}

}  // namespace evpose
