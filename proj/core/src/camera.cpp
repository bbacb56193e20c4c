#include "groundflow/camera.hpp"

#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
namespace
{
void check_geometry(double height_z, double fov_alpha)
{
  if (!(height_z > 0.0) || !std::isfinite(height_z)) {
    throw Error(ErrorKind::domain, fmt::format("camera height must be positive, got {}", height_z));
  }
  if (!(fov_alpha > 0.0 && fov_alpha < std::numbers::pi)) {
    throw Error(ErrorKind::domain, fmt::format("field of view must lie in (0, pi), got {}", fov_alpha));
  }
}

// Ground width seen across the sensor, in metres.
double footprint(const CameraModel & cam)
{
  check_geometry(cam.height_z, cam.fov_alpha);
  return cam.height_z * 2.0 * std::tan(0.5 * cam.fov_alpha);
}

}  // namespace

CameraModel CameraModel::from_fov(int width, int height, double fov_alpha, double height_z)
{
  check_geometry(height_z, fov_alpha);
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fov_alpha = fov_alpha;
  cam.height_z = height_z;
  cam.f_px = 0.5 * width / std::tan(0.5 * fov_alpha);
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  return cam;
}

CameraModel CameraModel::from_focal(int width, int height, double f_px, double height_z)
{
  if (!(f_px > 0.0)) {
    throw Error(ErrorKind::domain, fmt::format("focal length must be positive, got {}", f_px));
  }
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.f_px = f_px;
  cam.height_z = height_z;
  cam.fov_alpha = 2.0 * std::atan(0.5 * width / f_px);
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  check_geometry(height_z, cam.fov_alpha);
  return cam;
}

void CameraModel::validate() const
{
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::domain, fmt::format("sensor size must be positive, got {}x{}", width, height));
  }
  if (!(f_px > 0.0) || !std::isfinite(f_px)) {
    throw Error(ErrorKind::domain, fmt::format("focal length must be positive, got {}", f_px));
  }
  check_geometry(height_z, fov_alpha);
  const double f_from_fov = 0.5 * width / std::tan(0.5 * fov_alpha);
  if (std::abs(f_from_fov - f_px) > 0.01 * f_px) {
    throw Error(
      ErrorKind::domain,
      fmt::format("focal length {} px disagrees with field of view ({} px implied)", f_px, f_from_fov));
  }
}

double relative_motion_blur(double t_exp, double v, const CameraModel & cam)
{
  if (t_exp < 0.0 || v < 0.0) {
    throw Error(ErrorKind::domain, "exposure time and speed must be non-negative");
  }
  return t_exp * v / footprint(cam);
}

double motion_blur_pixels(double t_exp, double v, const CameraModel & cam)
{
  return relative_motion_blur(t_exp, v, cam) * cam.width;
}

std::optional<double> max_exposure_for_blur(double blur_budget, double v, const CameraModel & cam)
{
  if (!(blur_budget > 0.0) || v < 0.0) {
    throw Error(ErrorKind::domain, "blur budget must be positive and speed non-negative");
  }
  const double span = footprint(cam);
  if (v == 0.0) {
    return std::nullopt;
  }
  return blur_budget * span / v;
}

}  // namespace groundflow
