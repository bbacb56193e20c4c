#ifndef GROUNDFLOW_CAMERA_HPP
#define GROUNDFLOW_CAMERA_HPP

#include <optional>

namespace groundflow
{
/// Pinhole camera looking straight down at a ground plane.
///
/// Pixel centres sit at integer coordinates, so the default principal point of a
/// w x h sensor is ((w - 1) / 2, (h - 1) / 2).
struct CameraModel
{
  double f_px = 0.0;       // focal length, pixels
  double cx = 0.0;         // principal point, pixels
  double cy = 0.0;
  double height_z = 0.0;   // camera-to-ground distance, metres
  double fov_alpha = 0.0;  // horizontal field of view, radians
  int width = 0;
  int height = 0;

  /// Focal length derived from the horizontal field of view.
  static CameraModel from_fov(int width, int height, double fov_alpha, double height_z);
  /// Field of view derived from the focal length.
  static CameraModel from_focal(int width, int height, double f_px, double height_z);

  /// Throws ErrorKind::domain when an invariant is broken, including a focal
  /// length that disagrees with the field of view by more than 1 %.
  void validate() const;

  /// Ground distance covered by one pixel at the image centre.
  double metres_per_pixel() const { return height_z / f_px; }
};

/// Fraction of the image width the scene moves during one exposure:
/// t_exp * v / (z * 2 * tan(alpha / 2)).
double relative_motion_blur(double t_exp, double v, const CameraModel & cam);

/// Blur expressed in pixels across the sensor width.
double motion_blur_pixels(double t_exp, double v, const CameraModel & cam);

/// Longest exposure that keeps relative_motion_blur at or below blur_budget.
/// std::nullopt means there is no limit (the camera is not moving).
std::optional<double> max_exposure_for_blur(double blur_budget, double v, const CameraModel & cam);

}  // namespace groundflow

#endif  // GROUNDFLOW_CAMERA_HPP
