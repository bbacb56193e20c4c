#include "groundflow/rigid_motion.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
namespace
{
std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double wrap_angle(double theta)
{
  theta = std::remainder(theta, 2.0 * std::numbers::pi);
  return theta <= -std::numbers::pi ? theta + 2.0 * std::numbers::pi : theta;
}

}  // namespace

Svd2 svd2x2(const Mat2 & m)
{
  // m = R(phi) diag(sx, sy) R(psi); see Blinn, "Consider the lowly 2x2 matrix".
  const double e = 0.5 * (m.a + m.d);
  const double f = 0.5 * (m.a - m.d);
  const double g = 0.5 * (m.c + m.b);
  const double h = 0.5 * (m.c - m.b);
  const double q = std::hypot(e, h);
  const double r = std::hypot(f, g);
  const double a1 = std::atan2(g, f);
  const double a2 = std::atan2(h, e);
  const double psi = 0.5 * (a2 - a1);
  const double phi = 0.5 * (a2 + a1);

  Svd2 out;
  out.u = Mat2::rotation(phi);
  out.v = Mat2::rotation(-psi);
  out.s1 = q + r;
  double sy = q - r;
  if (sy < 0.0) {
    sy = -sy;
    out.u.b = -out.u.b;
    out.u.d = -out.u.d;
  }
  out.s2 = sy;
  return out;
}

RigidMotion2D estimate_rigid(std::span<const Correspondence> pairs)
{
  const std::size_t n = pairs.size();
  if (n < 2) {
    throw Error(ErrorKind::insufficient_data, fmt::format("rigid fit needs 2 pairs, got {}", n));
  }
  bool spread = false;
  for (const auto & c : pairs) {
    if (!(c.p == pairs.front().p)) {
      spread = true;
      break;
    }
  }
  if (!spread) {
    throw Error(ErrorKind::insufficient_data, "rigid fit: all source points coincide");
  }

  Vec2 p_bar, q_bar;
  for (const auto & c : pairs) {
    p_bar += c.p;
    q_bar += c.q;
  }
  p_bar *= 1.0 / static_cast<double>(n);
  q_bar *= 1.0 / static_cast<double>(n);

  // Cross-covariance H = sum (p - p_bar)(q - q_bar)^T
  Mat2 cov{0, 0, 0, 0};
  for (const auto & c : pairs) {
    const Vec2 dp = c.p - p_bar;
    const Vec2 dq = c.q - q_bar;
    cov.a += dp.x * dq.x;
    cov.b += dp.x * dq.y;
    cov.c += dp.y * dq.x;
    cov.d += dp.y * dq.y;
  }
  const Svd2 svd = svd2x2(cov);
  const double reflect = (svd.v * svd.u.transposed()).det() < 0.0 ? -1.0 : 1.0;
  const Mat2 rot = svd.v * Mat2{1, 0, 0, reflect} * svd.u.transposed();

  RigidMotion2D m;
  m.theta = wrap_angle(std::atan2(rot.c, rot.a));
  const Mat2 r = m.rotation();
  m.t = q_bar - r * p_bar;
  m.n_points = n;
  double residual = 0.0;
  for (const auto & c : pairs) {
    residual += (r * c.p + m.t - c.q).norm();
  }
  m.mean_residual = residual / static_cast<double>(n);
  return m;
}

double rigid_objective(const RigidMotion2D & motion, std::span<const Correspondence> pairs)
{
  const Mat2 r = motion.rotation();
  double sum = 0.0;
  for (const auto & c : pairs) {
    sum += (r * c.p + motion.t - c.q).squared_norm();
  }
  return sum;
}

std::vector<Vec2> reconstruct_flow(const RigidMotion2D & motion, std::span<const Vec2> points)
{
  const Mat2 r = motion.rotation();
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto & p : points) {
    out.push_back(r * p + motion.t);
  }
  return out;
}

void RansacParams::validate() const
{
  if (iterations < 1) {
    throw Error(ErrorKind::config, "RANSAC needs at least one iteration");
  }
  if (!(inlier_threshold > 0.0)) {
    throw Error(ErrorKind::config, "RANSAC inlier threshold must be positive");
  }
  if (!(min_inlier_fraction >= 0.0 && min_inlier_fraction <= 1.0)) {
    throw Error(ErrorKind::config, "RANSAC minimum inlier fraction must lie in [0, 1]");
  }
}

RansacResult ransac_estimate(
  std::span<const Correspondence> pairs, const RansacParams & params, std::uint64_t seed)
{
  params.validate();
  const std::size_t n = pairs.size();
  if (n < 2) {
    throw Error(ErrorKind::insufficient_data, fmt::format("RANSAC needs 2 pairs, got {}", n));
  }
  RansacResult result;
  if (!params.enabled) {
    result.motion = estimate_rigid(pairs);
    result.inliers.assign(n, 1);
    result.n_inliers = n;
    return result;
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::uint8_t> mask(n);
  std::vector<std::uint8_t> best_mask;
  std::size_t best_count = 0;
  const double eps = params.inlier_threshold;
  const long max_attempts = 10L * params.iterations;
  long attempts = 0;
  int iter = 0;
  while (iter < params.iterations && attempts < max_attempts) {
    ++attempts;
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    if (i == j || pairs[i].p == pairs[j].p) {
      continue;  // coincident sample, draw again
    }
    ++iter;
    const Correspondence sample[2] = {pairs[i], pairs[j]};
    const RigidMotion2D m = estimate_rigid(sample);
    const Mat2 r = m.rotation();
    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double epe = (r * pairs[k].p + m.t - pairs[k].q).norm();
      mask[k] = epe < eps;
      count += mask[k];
    }
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
    }
  }
  if (iter == 0) {
    throw Error(ErrorKind::insufficient_data, "RANSAC could not draw a non-degenerate sample");
  }
  const double fraction = static_cast<double>(best_count) / static_cast<double>(n);
  if (best_count < 2 || fraction < params.min_inlier_fraction) {
    throw Error(
      ErrorKind::degenerate_consensus,
      fmt::format("RANSAC consensus too small: {} of {} inliers", best_count, n));
  }
  std::vector<Correspondence> inliers;
  inliers.reserve(best_count);
  for (std::size_t k = 0; k < n; ++k) {
    if (best_mask[k]) {
      inliers.push_back(pairs[k]);
    }
  }
  result.motion = estimate_rigid(inliers);
  result.inliers = std::move(best_mask);
  result.n_inliers = best_count;
  return result;
}

std::uint64_t frame_seed(std::uint64_t global_seed, std::uint64_t frame_index)
{
  return splitmix64(global_seed ^ splitmix64(frame_index));
}

namespace
{
void parse_axis(const std::string & text, int & axis, int & sign)
{
  std::string s = text;
  if (s.size() != 2 || (s[0] != '+' && s[0] != '-')) {
    throw Error(ErrorKind::config, fmt::format("axis mapping '{}' is not one of +x, -x, +y, -y", text));
  }
  sign = s[0] == '-' ? -1 : 1;
  s.erase(0, 1);
  if (s == "x") {
    axis = 0;
  } else if (s == "y") {
    axis = 1;
  } else {
    throw Error(ErrorKind::config, fmt::format("axis mapping '{}' is not one of +x, -x, +y, -y", text));
  }
}

std::string axis_str(int axis, int sign)
{
  return std::string(sign < 0 ? "-" : "+") + (axis == 0 ? "x" : "y");
}

}  // namespace

AxisMapping AxisMapping::parse(const std::string & image_x, const std::string & image_y)
{
  AxisMapping m;
  parse_axis(image_x, m.image_x_axis, m.image_x_sign);
  parse_axis(image_y, m.image_y_axis, m.image_y_sign);
  m.validate();
  return m;
}

std::string AxisMapping::image_x_str() const { return axis_str(image_x_axis, image_x_sign); }
std::string AxisMapping::image_y_str() const { return axis_str(image_y_axis, image_y_sign); }

void AxisMapping::validate() const
{
  const bool axes_ok = (image_x_axis == 0 || image_x_axis == 1) && (image_y_axis == 0 || image_y_axis == 1);
  const bool signs_ok = (image_x_sign == 1 || image_x_sign == -1) && (image_y_sign == 1 || image_y_sign == -1);
  if (!axes_ok || !signs_ok || image_x_axis == image_y_axis) {
    throw Error(ErrorKind::config, "axis mapping must be a signed permutation");
  }
}

Mat2 AxisMapping::matrix() const
{
  // Column j holds where image axis j lands in the vehicle frame.
  Mat2 m{0, 0, 0, 0};
  (image_x_axis == 0 ? m.a : m.c) = image_x_sign;
  (image_y_axis == 0 ? m.b : m.d) = image_y_sign;
  return m;
}

CameraVelocity to_camera_velocity(
  const RigidMotion2D & motion, const CameraModel & cam, double dt, const AxisMapping & mapping,
  double t_mid, const FrameQuality & quality)
{
  if (!(dt > 0.0)) {
    throw Error(ErrorKind::contract, "velocity conversion needs dt > 0");
  }
  const Vec2 centre{cam.cx, cam.cy};
  // Image displacement of the ground point under the principal point, in the
  // later frame, then rotated back half way to the middle of the pair.
  const Vec2 shift = motion.apply(centre) - centre;
  const double half = 0.5 * motion.theta;
  const double arc_over_chord = half == 0.0 ? 1.0 : half / std::sin(half);
  const Vec2 mid = rotate(shift, -half) * arc_over_chord;

  CameraVelocity cv;
  cv.v_c = mapping.matrix() * (mid * (cam.height_z / cam.f_px / dt));
  cv.omega = motion.theta / dt;
  cv.t_mid = t_mid;
  cv.quality = quality;
  return cv;
}

}  // namespace groundflow
