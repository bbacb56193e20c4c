#include "groundflow/event_core.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
void AccumulationConfig::validate() const
{
  if (window <= 0) {
    throw Error(ErrorKind::config, fmt::format("accumulation window must be positive, got {} us", window));
  }
  if (count_cap < 1) {
    throw Error(ErrorKind::config, "count cap must be at least 1");
  }
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535) {
    throw Error(ErrorKind::config, fmt::format("invalid sensor size {}x{}", width, height));
  }
}

void check_event(const Event & e, int width, int height)
{
  if (e.x >= width || e.y >= height) {
    throw Error(
      ErrorKind::malformed_input,
      fmt::format("event at t={} us outside sensor: ({}, {}) not in {}x{}", e.t, e.x, e.y, width, height));
  }
  if (e.polarity != 1 && e.polarity != -1) {
    throw Error(
      ErrorKind::malformed_input, fmt::format("event at t={} us has polarity {}", e.t, int{e.polarity}));
  }
}

FrameAccumulator::FrameAccumulator(AccumulationConfig cfg, std::optional<Timestamp> start)
: cfg_(cfg), anchor_(start)
{
  cfg_.validate();
  if (anchor_) {
    last_t_ = *anchor_;
  }
}

void FrameAccumulator::open(Timestamp t_start)
{
  EventFrame f;
  f.t_start = t_start;
  f.t_end = t_start + cfg_.window;
  f.pos_counts = Grid<std::uint16_t>(cfg_.width, cfg_.height, 0);
  f.neg_counts = Grid<std::uint16_t>(cfg_.width, cfg_.height, 0);
  current_ = std::move(f);
}

void FrameAccumulator::close_into(std::vector<EventFrame> & completed)
{
  completed.push_back(std::move(*current_));
  current_.reset();
}

void FrameAccumulator::push(const Event & e, std::vector<EventFrame> & completed)
{
  check_event(e, cfg_.width, cfg_.height);
  if (!anchor_) {
    anchor_ = e.t;
    last_t_ = e.t;
  }
  if (e.t < last_t_) {
    throw Error(
      ErrorKind::ordering, fmt::format("event timestamps go backwards: {} us after {} us", e.t, last_t_));
  }
  last_t_ = e.t;
  if (!current_) {
    open(*anchor_);
  }
  while (e.t >= current_->t_end) {
    const Timestamp next_start = current_->t_end;
    close_into(completed);
    open(next_start);
  }
  auto & grid = e.polarity > 0 ? current_->pos_counts : current_->neg_counts;
  auto & cell = grid(e.x, e.y);
  if (cell < cfg_.count_cap) {
    ++cell;
  }
  ++current_->event_total;
}

void FrameAccumulator::finish(std::vector<EventFrame> & completed, std::optional<Timestamp> t_end)
{
  if (!current_ && anchor_ && t_end && *anchor_ < *t_end) {
    open(*anchor_);
  }
  while (current_) {
    const Timestamp next_start = current_->t_end;
    close_into(completed);
    if (t_end && next_start < *t_end) {
      open(next_start);
    }
  }
}

std::vector<EventFrame> accumulate(std::span<const Event> events, const AccumulationConfig & cfg)
{
  if (events.empty()) {
    return accumulate(events, cfg, 0, cfg.window);
  }
  std::vector<EventFrame> frames;
  FrameAccumulator acc(cfg);
  for (const auto & e : events) {
    acc.push(e, frames);
  }
  acc.finish(frames);
  return frames;
}

std::vector<EventFrame> accumulate(
  std::span<const Event> events, const AccumulationConfig & cfg, Timestamp t_begin, Timestamp t_end)
{
  if (t_end <= t_begin) {
    throw Error(ErrorKind::contract, "accumulation range must not be empty");
  }
  std::vector<EventFrame> frames;
  FrameAccumulator acc(cfg, t_begin);
  for (const auto & e : events) {
    if (e.t < t_begin || e.t >= t_end) {
      throw Error(
        ErrorKind::malformed_input,
        fmt::format("event at t={} us outside range [{}, {})", e.t, t_begin, t_end));
    }
    acc.push(e, frames);
  }
  acc.finish(frames, t_end);
  return frames;
}

Image8 to_intensity(const EventFrame & frame, std::uint16_t count_cap, MergeMode merge)
{
  const int w = frame.pos_counts.width();
  const int h = frame.pos_counts.height();
  Image8 out(w, h, 0);
  const std::uint32_t cap = std::max<std::uint16_t>(count_cap, 1);
  const auto pos = frame.pos_counts.values();
  const auto neg = frame.neg_counts.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::uint32_t count = 0;
    switch (merge) {
      case MergeMode::sum:
        count = std::uint32_t{pos[i]} + neg[i];
        break;
      case MergeMode::positive:
        count = pos[i];
        break;
      case MergeMode::negative:
        count = neg[i];
        break;
    }
    count = std::min(count, cap);
    // round(count * 255 / cap), halves rounded up
    dst[i] = static_cast<std::uint8_t>((2 * count * 255 + cap) / (2 * cap));
  }
  return out;
}

}  // namespace groundflow
