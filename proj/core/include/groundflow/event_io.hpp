#ifndef GROUNDFLOW_EVENT_IO_HPP
#define GROUNDFLOW_EVENT_IO_HPP

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundflow/event_core.hpp"

namespace groundflow
{
struct SensorSize
{
  int width = 0;
  int height = 0;
  friend bool operator==(const SensorSize &, const SensorSize &) = default;
};

/// Pull-style event stream.
class EventSource
{
public:
  virtual ~EventSource() = default;
  /// Returns false at end of stream.
  virtual bool next(Event & e) = 0;
};

class VectorEventSource : public EventSource
{
public:
  explicit VectorEventSource(std::span<const Event> events) : events_(events) {}
  bool next(Event & e) override
  {
    if (pos_ >= events_.size()) {
      return false;
    }
    e = events_[pos_++];
    return true;
  }

private:
  std::span<const Event> events_;
  std::size_t pos_ = 0;
};

/// Streaming reader for both on-disk formats.
///
/// CSV: header `t_us,x,y,p`, one event per line, p in {1,-1}.
/// Binary: magic `EVT1`, u16 width, u16 height, then packed little-endian
/// records of (u64 t_us, u16 x, u16 y, i8 p).
///
/// Every event is checked against the sensor bounds and the ordering
/// invariant as it is read; violations throw groundflow::Error.
class EventFileReader : public EventSource
{
public:
  /// `sensor` is required for CSV input. For binary input it is optional and,
  /// when given, must match the file header.
  static std::unique_ptr<EventFileReader> open(
    const std::filesystem::path & path, std::optional<SensorSize> sensor = std::nullopt);

  bool next(Event & e) override;
  SensorSize sensor() const { return sensor_; }
  bool is_binary() const { return binary_; }

private:
  EventFileReader() = default;
  bool next_binary(Event & e);
  bool next_csv(Event & e);

  std::ifstream in_;
  SensorSize sensor_;
  bool binary_ = false;
  std::size_t line_ = 1;
  std::optional<Timestamp> last_t_;
};

std::vector<Event> read_events(
  const std::filesystem::path & path, std::optional<SensorSize> sensor = std::nullopt);

void write_events_csv(std::ostream & out, std::span<const Event> events);
void write_events_binary(std::ostream & out, std::span<const Event> events, SensorSize sensor);
void write_events(
  const std::filesystem::path & path, std::span<const Event> events, SensorSize sensor);

}  // namespace groundflow

#endif  // GROUNDFLOW_EVENT_IO_HPP
