#ifndef GROUNDFLOW_RIGID_MOTION_HPP
#define GROUNDFLOW_RIGID_MOTION_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "groundflow/camera.hpp"
#include "groundflow/dense_flow.hpp"
#include "groundflow/geometry.hpp"

namespace groundflow
{
/// Planar rigid motion q = R(theta) p + t in pixel coordinates.
struct RigidMotion2D
{
  double theta = 0.0;  // radians, in (-pi, pi]
  Vec2 t;              // pixels
  std::size_t n_points = 0;
  double mean_residual = 0.0;

  Mat2 rotation() const { return Mat2::rotation(theta); }
  Vec2 apply(const Vec2 & p) const { return rotation() * p + t; }
};

/// Singular value decomposition m = U diag(s1, s2) V^T of a 2x2 matrix with
/// s1 >= s2 >= 0 and U, V orthogonal.
struct Svd2
{
  Mat2 u;
  double s1 = 0.0;
  double s2 = 0.0;
  Mat2 v;
};

Svd2 svd2x2(const Mat2 & m);

/// Least-squares rotation and translation mapping every p onto its q.
/// Throws ErrorKind::insufficient_data for fewer than two pairs or when all p coincide.
RigidMotion2D estimate_rigid(std::span<const Correspondence> pairs);

/// Sum of squared residuals |R p + t - q|^2.
double rigid_objective(const RigidMotion2D & motion, std::span<const Correspondence> pairs);

std::vector<Vec2> reconstruct_flow(const RigidMotion2D & motion, std::span<const Vec2> points);

struct RansacParams
{
  int iterations = 16;
  double inlier_threshold = 0.5;  // pixels, end-point error
  double min_inlier_fraction = 0.3;
  bool enabled = true;

  void validate() const;
};

struct RansacResult
{
  RigidMotion2D motion;
  std::vector<std::uint8_t> inliers;
  std::size_t n_inliers = 0;
};

/// Two-point RANSAC around estimate_rigid. Deterministic for a given seed.
/// Throws ErrorKind::degenerate_consensus when the best inlier fraction is
/// below params.min_inlier_fraction.
RansacResult ransac_estimate(
  std::span<const Correspondence> pairs, const RansacParams & params, std::uint64_t seed);

/// Seed for one frame pair, independent of processing order.
std::uint64_t frame_seed(std::uint64_t global_seed, std::uint64_t frame_index);

/// Signed permutation taking image axes to vehicle axes (x forward, y left).
struct AxisMapping
{
  // Vehicle axis (0 = x, 1 = y) and sign that image +x and image +y map to.
  int image_x_axis = 0;
  int image_x_sign = 1;
  int image_y_axis = 1;
  int image_y_sign = 1;

  /// Parses "+x", "-y", ... for one image axis.
  static AxisMapping parse(const std::string & image_x, const std::string & image_y);
  std::string image_x_str() const;
  std::string image_y_str() const;
  Mat2 matrix() const;
  void validate() const;
  friend bool operator==(const AxisMapping &, const AxisMapping &) = default;
};

struct FrameQuality
{
  std::size_t n_inliers = 0;
  std::size_t n_total = 0;
  double inlier_fraction = 0.0;
  double mean_residual = 0.0;
};

/// Metric velocity of the camera centre in the vehicle frame.
struct CameraVelocity
{
  Vec2 v_c;            // m/s
  double omega = 0.0;  // rad/s, z-up counter-clockwise
  double t_mid = 0.0;  // seconds
  FrameQuality quality;
};

/// Converts a pixel-space frame-pair motion into metric camera-centre velocity.
///
/// The translation used is that of the principal point, expressed at the middle
/// of the pair and corrected from chord to arc length, so that a constant
/// velocity and yaw rate are recovered exactly. With theta = 0 this reduces to
/// v_c = t * height_z / f_px / dt. omega = theta / dt.
CameraVelocity to_camera_velocity(
  const RigidMotion2D & motion, const CameraModel & cam, double dt,
  const AxisMapping & mapping = {}, double t_mid = 0.0, const FrameQuality & quality = {});

}  // namespace groundflow

#endif  // GROUNDFLOW_RIGID_MOTION_HPP
