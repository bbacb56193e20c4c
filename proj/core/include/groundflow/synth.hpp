#ifndef GROUNDFLOW_SYNTH_HPP
#define GROUNDFLOW_SYNTH_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "groundflow/camera.hpp"
#include "groundflow/dense_flow.hpp"
#include "groundflow/event_core.hpp"
#include "groundflow/vehicle_state.hpp"

namespace groundflow
{
/// Camera-centre velocity in the vehicle frame over time.
struct TrajectorySample
{
  double t = 0.0;      // seconds
  double v_lon = 0.0;  // m/s
  double v_lat = 0.0;
  double omega = 0.0;  // rad/s
};

/// Piecewise-linear trajectory.
class Trajectory
{
public:
  /// Throws ErrorKind::contract unless times strictly increase and values are finite.
  explicit Trajectory(std::vector<TrajectorySample> samples);

  static Trajectory constant(double duration, double v_lon, double v_lat, double omega);

  TrajectorySample at(double t) const;
  double start() const { return samples_.front().t; }
  double end() const { return samples_.back().t; }
  const std::vector<TrajectorySample> & samples() const { return samples_; }

private:
  std::vector<TrajectorySample> samples_;
};

/// Laps-style profile: speed swinging between v_min and v_max with
/// alternating straight and constant-yaw-rate turning segments.
Trajectory racing_trajectory(
  double duration, double v_min, double v_max, double turn_rate, double segment_length);

enum class TextureKind { noise, checker, dots };

struct TextureSpec
{
  TextureKind kind = TextureKind::noise;
  std::uint64_t seed = 1;
  double cutoff_px = 6.0;         // noise: feature size
  double checker_period_px = 16;  // checker: cell edge length
  double dot_density = 0.01;      // dots per square pixel
  double dot_radius_px = 2.5;
  double intensity_min = 0.1;     // linear intensity range
  double intensity_max = 1.0;
};

/// Infinite procedural texture on the ground plane.
///
/// Values live on the integer lattice of texture coordinates and are sampled
/// bilinearly in between. Lattice values are cached in tiles, so an instance
/// is not safe to share between threads.
class Texture
{
public:
  explicit Texture(TextureSpec spec);
  ~Texture();
  Texture(Texture &&) noexcept;
  Texture & operator=(Texture &&) noexcept;

  /// Linear intensity at a lattice point.
  float lattice(std::int64_t i, std::int64_t j);
  /// Bilinear linear intensity at texture coordinates.
  float sample(double u, double v);

  const TextureSpec & spec() const { return spec_; }

private:
  float evaluate(std::int64_t i, std::int64_t j) const;
  const float * tile(std::int64_t ti, std::int64_t tj);

  TextureSpec spec_;
  struct Tiles;
  std::unique_ptr<Tiles> tiles_;
};

/// Camera pose over the ground plane: centre position (metres, world frame)
/// and yaw (radians, counter-clockwise).
struct Pose2
{
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

/// Log intensity seen by the downward camera at `pose`.
///
/// The camera looks straight down with image +x towards vehicle right and
/// image +y towards vehicle rear. At the identity pose, pixel (u, v) shows
/// texture coordinate (u, v); other poses apply the ground-to-image similarity
/// with scale f_px / height_z.
ImageF render_plane(Texture & texture, const Pose2 & pose, const CameraModel & cam);

/// Image-to-vehicle axis mapping matching render_plane's mounting.
AxisMapping simulator_axis_mapping();

struct SimConfig
{
  TextureSpec texture;
  double contrast_threshold = 0.2;  // log-intensity units
  double noise_rate = 0.1;          // spurious events per pixel per second
  CameraModel cam;
  Extrinsics ext;
  double duration = 1.0;   // seconds
  double time_step = 0.0;  // rendering substep, seconds
  double gt_rate_hz = 0.0; // 0: one ground-truth row per substep
  double imu_rate_hz = 1000.0;
  double imu_bias = 0.0;   // rad/s added to the simulated IMU
  Pose2 start_pose;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimOutput
{
  std::vector<Event> events;
  std::vector<VelocityEstimate> ground_truth;  // at the rear axle
  std::vector<ImuSample> imu;
};

/// Contrast-threshold event simulation of the textured plane under `traj`.
SimOutput generate_events(const SimConfig & cfg, const Trajectory & traj);

/// Pose after integrating `traj` from the origin, sampled at `times` (ascending).
std::vector<Pose2> integrate_poses(const Trajectory & traj, const std::vector<double> & times);

/// Replaces a seeded random subset of valid vectors with random directions of
/// length `magnitude`.
FlowField inject_outliers(const FlowField & field, double fraction, double magnitude, std::uint64_t seed);

}  // namespace groundflow

#endif  // GROUNDFLOW_SYNTH_HPP
