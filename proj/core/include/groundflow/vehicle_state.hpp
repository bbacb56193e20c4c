#ifndef GROUNDFLOW_VEHICLE_STATE_HPP
#define GROUNDFLOW_VEHICLE_STATE_HPP

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundflow/event_core.hpp"
#include "groundflow/geometry.hpp"
#include "groundflow/rigid_motion.hpp"

namespace groundflow
{
struct Extrinsics
{
  Vec2 ca;  // camera centre -> rear-axle centre, metres, vehicle frame

  void validate() const;
};

struct ImuSample
{
  Timestamp t = 0;  // microseconds
  double yaw_rate = 0.0;  // rad/s, z-up counter-clockwise
};

/// Append-only IMU history.
///
/// One writer may append while any number of readers look up past samples;
/// readers never block and only see fully written samples.
class ImuIndex
{
public:
  ImuIndex();
  ~ImuIndex();
  ImuIndex(const ImuIndex &) = delete;
  ImuIndex & operator=(const ImuIndex &) = delete;

  explicit ImuIndex(std::span<const ImuSample> samples);

  /// Throws ErrorKind::ordering if t goes backwards.
  void append(const ImuSample & s);
  std::size_t size() const { return size_.load(std::memory_order_acquire); }
  ImuSample at(std::size_t i) const;

  /// Linear interpolation of the yaw rate at `t_seconds`. Outside the covered
  /// range the nearest sample is held. Returns std::nullopt when the nearest
  /// sample is more than `max_staleness` seconds away.
  std::optional<double> yaw_rate_at(double t_seconds, double max_staleness) const;

private:
  static constexpr std::size_t kChunkBits = 12;
  static constexpr std::size_t kChunkSize = std::size_t{1} << kChunkBits;
  static constexpr std::size_t kMaxChunks = 4096;
  using Chunk = std::array<ImuSample, kChunkSize>;

  std::unique_ptr<std::atomic<Chunk *>[]> chunks_;
  std::atomic<std::size_t> size_{0};
};

enum class OmegaSource { flow, imu, truth };

/// Why a frame pair produced no usable estimate.
enum class FrameStatus { ok, textureless, insufficient_data, degenerate_consensus, stale_imu };

const char * to_string(OmegaSource s);
const char * to_string(FrameStatus s);

struct VelocityEstimate
{
  double t_mid = 0.0;  // seconds
  double v_lon = 0.0;  // m/s
  double v_lat = 0.0;
  double omega = 0.0;  // rad/s
  OmegaSource omega_source = OmegaSource::flow;
  FrameQuality quality;
  bool valid = true;
  FrameStatus status = FrameStatus::ok;
};

/// Rear-axle velocity v_A = v_c + omega x CA.
VelocityEstimate transform_to_axle(const CameraVelocity & cv, const Extrinsics & ext);

/// As transform_to_axle, with omega taken from the IMU at cv.t_mid. A stale
/// IMU yields an estimate with valid = false and status stale_imu.
VelocityEstimate substitute_imu_yaw(
  const CameraVelocity & cv, const ImuIndex & imu, const Extrinsics & ext, double max_staleness);

std::vector<ImuSample> read_imu_csv(const std::filesystem::path & path);
void write_imu_csv(std::ostream & out, std::span<const ImuSample> samples);

/// Header `t_s,v_lon,v_lat,omega,omega_source,n_inliers,inlier_fraction,valid`.
void write_velocity_csv(std::ostream & out, std::span<const VelocityEstimate> rows);
void write_velocity_csv_header(std::ostream & out);
void write_velocity_csv_row(std::ostream & out, const VelocityEstimate & row);
std::vector<VelocityEstimate> read_velocity_csv(const std::filesystem::path & path);

}  // namespace groundflow

#endif  // GROUNDFLOW_VEHICLE_STATE_HPP
