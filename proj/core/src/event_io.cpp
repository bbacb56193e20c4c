#include "groundflow/event_io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <limits>
#include <ostream>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
namespace
{
constexpr std::array<char, 4> kMagic = {'E', 'V', 'T', '1'};
constexpr std::size_t kRecordSize = 8 + 2 + 2 + 1;

template <typename T>
void put_le(std::ostream & out, T value)
{
  std::array<char, sizeof(T)> bytes;
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char * p)
{
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i);
  }
  return static_cast<T>(u);
}

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_field(std::string_view text, T & value)
{
  text = trim(text);
  if (!text.empty() && text.front() == '+') {
    text.remove_prefix(1);
  }
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::unique_ptr<EventFileReader> EventFileReader::open(
  const std::filesystem::path & path, std::optional<SensorSize> sensor)
{
  std::unique_ptr<EventFileReader> r(new EventFileReader());
  r->in_.open(path, std::ios::binary);
  if (!r->in_) {
    throw Error(ErrorKind::malformed_input, fmt::format("cannot open event file '{}'", path.string()));
  }
  std::array<char, 4> head{};
  r->in_.read(head.data(), head.size());
  if (r->in_.gcount() == 4 && head == kMagic) {
    unsigned char dims[4];
    r->in_.read(reinterpret_cast<char *>(dims), 4);
    if (r->in_.gcount() != 4) {
      throw Error(ErrorKind::malformed_input, fmt::format("'{}': truncated header", path.string()));
    }
    r->binary_ = true;
    r->sensor_ = {get_le<std::uint16_t>(dims), get_le<std::uint16_t>(dims + 2)};
    if (sensor && *sensor != r->sensor_) {
      throw Error(
        ErrorKind::malformed_input,
        fmt::format(
          "'{}': sensor {}x{} does not match configured {}x{}", path.string(), r->sensor_.width,
          r->sensor_.height, sensor->width, sensor->height));
    }
    return r;
  }
  if (!sensor) {
    throw Error(ErrorKind::malformed_input, fmt::format("'{}': CSV events need a sensor size", path.string()));
  }
  r->sensor_ = *sensor;
  r->in_.clear();
  r->in_.seekg(0);
  std::string header;
  std::getline(r->in_, header);
  std::string_view h = trim(header);
  if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) {
    h.remove_prefix(3);  // UTF-8 BOM
  }
  if (h != "t_us,x,y,p") {
    throw Error(
      ErrorKind::malformed_input,
      fmt::format("'{}': expected header 't_us,x,y,p', got '{}'", path.string(), header));
  }
  return r;
}

bool EventFileReader::next(Event & e)
{
  const bool ok = binary_ ? next_binary(e) : next_csv(e);
  if (!ok) {
    return false;
  }
  check_event(e, sensor_.width, sensor_.height);
  if (last_t_ && e.t < *last_t_) {
    throw Error(
      ErrorKind::ordering,
      fmt::format("event timestamps go backwards: {} us after {} us", e.t, *last_t_));
  }
  last_t_ = e.t;
  return true;
}

bool EventFileReader::next_binary(Event & e)
{
  unsigned char rec[kRecordSize];
  in_.read(reinterpret_cast<char *>(rec), kRecordSize);
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got == 0) {
    return false;
  }
  if (got != kRecordSize) {
    throw Error(ErrorKind::malformed_input, "truncated event record");
  }
  const auto t = get_le<std::uint64_t>(rec);
  if (t > static_cast<std::uint64_t>(std::numeric_limits<Timestamp>::max())) {
    throw Error(ErrorKind::malformed_input, "event timestamp overflows");
  }
  e.t = static_cast<Timestamp>(t);
  e.x = get_le<std::uint16_t>(rec + 8);
  e.y = get_le<std::uint16_t>(rec + 10);
  e.polarity = static_cast<std::int8_t>(rec[12]);
  return true;
}

bool EventFileReader::next_csv(Event & e)
{
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    const std::string_view s = trim(line);
    if (s.empty()) {
      continue;
    }
    std::array<std::string_view, 4> fields;
    std::size_t start = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == ',') {
        if (n == fields.size()) {
          n = fields.size() + 1;
          break;
        }
        fields[n++] = s.substr(start, i - start);
        start = i + 1;
      }
    }
    Timestamp t = 0;
    unsigned x = 0;
    unsigned y = 0;
    int p = 0;
    if (
      n != 4 || !parse_field(fields[0], t) || !parse_field(fields[1], x) || !parse_field(fields[2], y) ||
      !parse_field(fields[3], p) || t < 0 || x > 65535 || y > 65535 || p < -128 || p > 127) {
      throw Error(ErrorKind::malformed_input, fmt::format("line {}: cannot parse event '{}'", line_, line));
    }
    e.t = t;
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.polarity = static_cast<std::int8_t>(p);
    return true;
  }
  return false;
}

std::vector<Event> read_events(const std::filesystem::path & path, std::optional<SensorSize> sensor)
{
  auto reader = EventFileReader::open(path, sensor);
  std::vector<Event> events;
  Event e;
  while (reader->next(e)) {
    events.push_back(e);
  }
  return events;
}

void write_events_csv(std::ostream & out, std::span<const Event> events)
{
  out << "t_us,x,y,p\n";
  for (const auto & e : events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << int{e.polarity} << '\n';
  }
}

void write_events_binary(std::ostream & out, std::span<const Event> events, SensorSize sensor)
{
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(sensor.width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(sensor.height));
  for (const auto & e : events) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t));
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::int8_t>(out, e.polarity);
  }
}

void write_events(const std::filesystem::path & path, std::span<const Event> events, SensorSize sensor)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::malformed_input, fmt::format("cannot write '{}'", path.string()));
  }
  if (path.extension() == ".csv") {
    write_events_csv(out, events);
  } else {
    write_events_binary(out, events, sensor);
  }
}

}  // namespace groundflow
