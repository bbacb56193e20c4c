#include "groundflow/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <limits>
#include <mutex>
#include <ostream>
#include <queue>
#include <thread>

#include <fmt/core.h>

#include "groundflow/dense_flow.hpp"
#include "groundflow/error.hpp"
#include "groundflow/event_core.hpp"
#include "groundflow/rigid_motion.hpp"
#include "groundflow/synth.hpp"

namespace groundflow
{
namespace
{
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct PreparedFrame
{
  std::size_t index = 0;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  Image8 merged;
  Image8 pos;
  Image8 neg;
  double accumulate_ms = 0.0;
  double intensity_ms = 0.0;
};

PreparedFrame prepare(const EventFrame & f, std::size_t index, const RunConfig & cfg, double accumulate_ms)
{
  const auto t0 = Clock::now();
  PreparedFrame p;
  p.index = index;
  p.t_start = f.t_start;
  p.t_end = f.t_end;
  if (cfg.polarity == PolarityChannels::merged) {
    p.merged = to_intensity(f, cfg.accum.count_cap, MergeMode::sum);
  } else {
    p.pos = to_intensity(f, cfg.accum.count_cap, MergeMode::positive);
    p.neg = to_intensity(f, cfg.accum.count_cap, MergeMode::negative);
  }
  p.accumulate_ms = accumulate_ms;
  p.intensity_ms = ms_since(t0);
  return p;
}

VelocityEstimate invalid_estimate(double t_mid, FrameStatus status, const FrameQuality & q = {})
{
  VelocityEstimate e;
  e.t_mid = t_mid;
  e.v_lon = e.v_lat = e.omega = std::numeric_limits<double>::quiet_NaN();
  e.quality = q;
  e.valid = false;
  e.status = status;
  return e;
}

FrameRecord process_pair(
  const RunConfig & cfg, const PreparedFrame & prev, const PreparedFrame & next, const ImuIndex * imu)
{
  const auto t_task = Clock::now();
  FrameRecord rec;
  rec.index = next.index;
  rec.timings.accumulate = next.accumulate_ms;
  rec.timings.intensity = next.intensity_ms;
  const double dt = cfg.window_seconds();
  // Velocity is stamped at the boundary shared by the two windows.
  const double t_mid = 1e-6 * static_cast<double>(prev.t_end);
  const std::uint64_t seed = frame_seed(cfg.seed, next.index);

  auto t0 = Clock::now();
  std::vector<FlowField> fields;
  if (cfg.polarity == PolarityChannels::merged) {
    fields.push_back(compute_flow(prev.merged, next.merged, cfg.flow, dt));
  } else {
    fields.push_back(compute_flow(prev.pos, next.pos, cfg.flow, dt));
    fields.push_back(compute_flow(prev.neg, next.neg, cfg.flow, dt));
  }
  rec.timings.flow = ms_since(t0);

  t0 = Clock::now();
  std::vector<Correspondence> pairs;
  std::size_t valid_pixels = 0;
  for (std::size_t c = 0; c < fields.size(); ++c) {
    const FlowField * field = &fields[c];
    FlowField faulty;
    if (cfg.outlier_fraction > 0.0) {
      faulty = inject_outliers(*field, cfg.outlier_fraction, cfg.outlier_magnitude, seed ^ (0xF00Dull + c));
      field = &faulty;
    }
    valid_pixels += field->valid_count();
    const auto sub = subsample_flow(*field, cfg.flow_stride);
    pairs.insert(pairs.end(), sub.begin(), sub.end());
  }
  rec.n_correspondences = pairs.size();
  rec.timings.subsample = ms_since(t0);

  auto finish = [&](VelocityEstimate e) {
    rec.estimate = e;
    rec.timings.total = rec.timings.accumulate + rec.timings.intensity + ms_since(t_task);
    return rec;
  };
  if (valid_pixels == 0) {
    return finish(invalid_estimate(t_mid, FrameStatus::textureless));
  }

  t0 = Clock::now();
  RansacResult fit;
  try {
    fit = ransac_estimate(pairs, cfg.ransac, seed);
  } catch (const Error & e) {
    rec.timings.motion = ms_since(t0);
    FrameQuality q;
    q.n_total = pairs.size();
    switch (e.kind()) {
      case ErrorKind::insufficient_data:
        return finish(invalid_estimate(t_mid, FrameStatus::insufficient_data, q));
      case ErrorKind::degenerate_consensus:
        return finish(invalid_estimate(t_mid, FrameStatus::degenerate_consensus, q));
      default:
        throw;
    }
  }
  rec.timings.motion = ms_since(t0);

  t0 = Clock::now();
  FrameQuality q;
  q.n_inliers = fit.n_inliers;
  q.n_total = pairs.size();
  q.inlier_fraction = static_cast<double>(fit.n_inliers) / static_cast<double>(pairs.size());
  q.mean_residual = fit.motion.mean_residual;
  CameraVelocity cv = to_camera_velocity(fit.motion, cfg.camera, dt, cfg.mapping, t_mid, q);
  cv.omega += cfg.omega_bias;
  VelocityEstimate est;
  if (cfg.omega_source == OmegaSource::imu) {
    if (imu == nullptr) {
      throw Error(ErrorKind::config, "omega.source = imu but no IMU stream was given");
    }
    est = substitute_imu_yaw(cv, *imu, cfg.ext, cfg.imu_staleness_windows * dt);
    if (!est.valid) {
      est.v_lon = est.v_lat = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    est = transform_to_axle(cv, cfg.ext);
  }
  rec.timings.velocity = ms_since(t0);
  return finish(est);
}

// Fixed-size pool; results are collected through futures in submission order.
class WorkerPool
{
public:
  explicit WorkerPool(int n)
  {
    for (int i = 0; i < n; ++i) {
      threads_.emplace_back([this] { run(); });
    }
  }

  ~WorkerPool()
  {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto & t : threads_) {
      t.join();
    }
  }

  std::future<FrameRecord> submit(std::function<FrameRecord()> fn)
  {
    std::packaged_task<FrameRecord()> task(std::move(fn));
    auto fut = task.get_future();
    {
      std::lock_guard lock(mutex_);
      jobs_.push(std::move(task));
    }
    cv_.notify_one();
    return fut;
  }

private:
  void run()
  {
    for (;;) {
      std::packaged_task<FrameRecord()> job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
        if (jobs_.empty()) {
          return;
        }
        job = std::move(jobs_.front());
        jobs_.pop();
      }
      job();
    }
  }

  std::vector<std::thread> threads_;
  std::queue<std::packaged_task<FrameRecord()>> jobs_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
};

}  // namespace

PipelineSummary run_pipeline(
  const RunConfig & cfg, EventSource & events, const ImuIndex * imu, const FrameSink & sink)
{
  cfg.validate();
  PipelineSummary summary;
  auto emit = [&](const FrameRecord & rec) {
    ++summary.frames_in;
    ++(rec.estimate.valid ? summary.frames_valid : summary.frames_invalid);
    sink(rec);
  };

  std::unique_ptr<WorkerPool> pool;
  if (cfg.workers > 1) {
    pool = std::make_unique<WorkerPool>(cfg.workers);
  }
  std::deque<std::future<FrameRecord>> in_flight;
  const std::size_t max_in_flight = 2 * static_cast<std::size_t>(cfg.workers);

  auto prev = std::make_shared<const PreparedFrame>();
  bool have_prev = false;
  std::size_t index = 0;
  auto on_frame = [&](const EventFrame & f, double accumulate_ms) {
    auto cur = std::make_shared<const PreparedFrame>(prepare(f, index++, cfg, accumulate_ms));
    if (have_prev) {
      if (!pool) {
        emit(process_pair(cfg, *prev, *cur, imu));
      } else {
        while (in_flight.size() >= max_in_flight) {
          emit(in_flight.front().get());
          in_flight.pop_front();
        }
        in_flight.push_back(pool->submit([&cfg, imu, prev, cur] { return process_pair(cfg, *prev, *cur, imu); }));
      }
    }
    prev = cur;
    have_prev = true;
  };

  FrameAccumulator acc(cfg.accum, cfg.t_begin);
  std::vector<EventFrame> done;
  Event e;
  auto t_acc = Clock::now();
  auto drain = [&] {
    for (const auto & f : done) {
      on_frame(f, ms_since(t_acc));
      t_acc = Clock::now();
    }
    done.clear();
  };
  try {
    while (events.next(e)) {
      if (cfg.t_end && e.t >= *cfg.t_end) {
        throw Error(
          ErrorKind::malformed_input,
          fmt::format("event at t = {} us lies beyond accum.end_us = {}", e.t, *cfg.t_end));
      }
      acc.push(e, done);
      if (!done.empty()) {
        drain();
      }
    }
    acc.finish(done, cfg.t_end);
    drain();
  } catch (...) {
    // let already-running jobs settle before unwinding the pool
    for (auto & f : in_flight) {
      f.wait();
    }
    throw;
  }
  while (!in_flight.empty()) {
    emit(in_flight.front().get());
    in_flight.pop_front();
  }
  return summary;
}

std::vector<FrameRecord> run_pipeline(
  const RunConfig & cfg, std::span<const Event> events, const ImuIndex * imu)
{
  VectorEventSource src(events);
  std::vector<FrameRecord> out;
  run_pipeline(cfg, src, imu, [&](const FrameRecord & r) { out.push_back(r); });
  return out;
}

void write_frame_log_header(std::ostream & out) { out << "frame,t_s,status,n_correspondences\n"; }

void write_frame_log_row(std::ostream & out, const FrameRecord & rec)
{
  out << fmt::format(
    "{},{:.6f},{},{}\n", rec.index, rec.estimate.t_mid, to_string(rec.estimate.status), rec.n_correspondences);
}

void write_latency_header(std::ostream & out)
{
  out << "frame,accumulate_ms,intensity_ms,flow_ms,subsample_ms,motion_ms,velocity_ms,total_ms\n";
}

void write_latency_row(std::ostream & out, const FrameRecord & rec)
{
  const auto & t = rec.timings;
  out << fmt::format(
    "{},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f}\n", rec.index, t.accumulate, t.intensity, t.flow,
    t.subsample, t.motion, t.velocity, t.total);
}

}  // namespace groundflow
