#ifndef GROUNDFLOW_EVENT_CORE_HPP
#define GROUNDFLOW_EVENT_CORE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "groundflow/grid.hpp"

namespace groundflow
{
/// Sensor time in integer microseconds.
using Timestamp = std::int64_t;

struct Event
{
  Timestamp t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;  // +1 brighter, -1 darker

  friend bool operator==(const Event &, const Event &) = default;
};

/// How the two polarity histograms become one grey image.
enum class MergeMode { sum, positive, negative };

struct AccumulationConfig
{
  Timestamp window = 33000;  // microseconds
  int width = 0;
  int height = 0;
  std::uint16_t count_cap = 15;

  void validate() const;
};

struct EventFrame
{
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  Grid<std::uint16_t> pos_counts;
  Grid<std::uint16_t> neg_counts;
  std::uint64_t event_total = 0;

  double t_mid_seconds() const { return 0.5e-6 * static_cast<double>(t_start + t_end); }
  friend bool operator==(const EventFrame &, const EventFrame &) = default;
};

/// Throws ErrorKind::malformed_input when the event lies outside the sensor or
/// carries a polarity other than +1/-1.
void check_event(const Event & e, int width, int height);

/// Incremental fixed-time accumulator.
///
/// Windows are anchored at the first pushed event unless an explicit start is
/// given. Frames for windows without events are emitted with zero counts.
class FrameAccumulator
{
public:
  explicit FrameAccumulator(AccumulationConfig cfg, std::optional<Timestamp> start = std::nullopt);

  /// Bins one event. Frames whose window closed before e.t are appended to
  /// `completed`, oldest first.
  void push(const Event & e, std::vector<EventFrame> & completed);

  /// Closes the open window. With `t_end`, also emits empty windows until the
  /// frames cover [start, t_end).
  void finish(std::vector<EventFrame> & completed, std::optional<Timestamp> t_end = std::nullopt);

  const AccumulationConfig & config() const { return cfg_; }

private:
  void open(Timestamp t_start);
  void close_into(std::vector<EventFrame> & completed);

  AccumulationConfig cfg_;
  std::optional<Timestamp> anchor_;
  std::optional<EventFrame> current_;
  Timestamp last_t_ = 0;
};

/// Bins an ordered stream into consecutive windows starting at the first event.
/// An empty stream yields one all-zero frame covering [0, window).
std::vector<EventFrame> accumulate(std::span<const Event> events, const AccumulationConfig & cfg);

/// Bins an ordered stream into the windows partitioning [t_begin, t_end).
/// Every event must fall inside that range.
std::vector<EventFrame> accumulate(
  std::span<const Event> events, const AccumulationConfig & cfg, Timestamp t_begin,
  Timestamp t_end);

/// Linear map of clipped counts onto [0, 255], rounding half up.
Image8 to_intensity(const EventFrame & frame, std::uint16_t count_cap, MergeMode merge = MergeMode::sum);

}  // namespace groundflow

#endif  // GROUNDFLOW_EVENT_CORE_HPP
