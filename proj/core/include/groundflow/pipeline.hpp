#ifndef GROUNDFLOW_PIPELINE_HPP
#define GROUNDFLOW_PIPELINE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "groundflow/config.hpp"
#include "groundflow/event_io.hpp"
#include "groundflow/vehicle_state.hpp"

namespace groundflow
{
/// Wall-clock milliseconds spent per stage on one frame pair.
struct StageTimings
{
  double accumulate = 0.0;
  double intensity = 0.0;
  double flow = 0.0;
  double subsample = 0.0;
  double motion = 0.0;
  double velocity = 0.0;
  double total = 0.0;  // end to end, includes orchestration

  double stage_sum() const { return accumulate + intensity + flow + subsample + motion + velocity; }
};

struct FrameRecord
{
  std::size_t index = 0;  // index of the later frame of the pair
  VelocityEstimate estimate;
  std::size_t n_correspondences = 0;
  StageTimings timings;
};

struct PipelineSummary
{
  std::size_t frames_in = 0;
  std::size_t frames_valid = 0;
  std::size_t frames_invalid = 0;
};

using FrameSink = std::function<void(const FrameRecord &)>;

/// Streams events through accumulate -> intensity -> flow -> subsample ->
/// rigid fit -> velocity -> rear axle. Records reach `sink` strictly in frame
/// order whatever cfg.workers is, and are identical to a serial run.
///
/// Per-frame failures become records with valid = false; stream-level errors
/// (format, ordering) propagate as groundflow::Error.
PipelineSummary run_pipeline(
  const RunConfig & cfg, EventSource & events, const ImuIndex * imu, const FrameSink & sink);

std::vector<FrameRecord> run_pipeline(
  const RunConfig & cfg, std::span<const Event> events, const ImuIndex * imu = nullptr);

/// Header `frame,t_s,status,n_correspondences`.
void write_frame_log_header(std::ostream & out);
void write_frame_log_row(std::ostream & out, const FrameRecord & rec);

/// Header `frame,accumulate_ms,intensity_ms,flow_ms,subsample_ms,motion_ms,velocity_ms,total_ms`.
void write_latency_header(std::ostream & out);
void write_latency_row(std::ostream & out, const FrameRecord & rec);

}  // namespace groundflow

#endif  // GROUNDFLOW_PIPELINE_HPP
