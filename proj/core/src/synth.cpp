#include "groundflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
namespace
{
std::uint64_t mix(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform [0, 1) hash of an integer lattice point.
double hash01(std::uint64_t seed, std::int64_t i, std::int64_t j, std::uint64_t salt)
{
  const std::uint64_t h =
    mix(seed ^ mix(static_cast<std::uint64_t>(i) ^ mix(static_cast<std::uint64_t>(j) ^ mix(salt))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise with lattice spacing `spacing`, smoothly interpolated.
double value_noise(std::uint64_t seed, double x, double y, double spacing, std::uint64_t salt)
{
  const double gx = x / spacing;
  const double gy = y / spacing;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = smoothstep(gx - fx);
  const double ty = smoothstep(gy - fy);
  const double v00 = hash01(seed, ix, iy, salt);
  const double v10 = hash01(seed, ix + 1, iy, salt);
  const double v01 = hash01(seed, ix, iy + 1, salt);
  const double v11 = hash01(seed, ix + 1, iy + 1, salt);
  return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

constexpr int kTileBits = 6;
constexpr int kTileSize = 1 << kTileBits;

}  // namespace

Trajectory::Trajectory(std::vector<TrajectorySample> samples) : samples_(std::move(samples))
{
  if (samples_.empty()) {
    throw Error(ErrorKind::contract, "trajectory has no samples");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto & s = samples_[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.v_lon) || !std::isfinite(s.v_lat) || !std::isfinite(s.omega)) {
      throw Error(ErrorKind::contract, fmt::format("trajectory sample {} is not finite", i));
    }
    if (i > 0 && !(s.t > samples_[i - 1].t)) {
      throw Error(ErrorKind::contract, fmt::format("trajectory time not increasing at sample {}", i));
    }
  }
}

Trajectory Trajectory::constant(double duration, double v_lon, double v_lat, double omega)
{
  return Trajectory({{0.0, v_lon, v_lat, omega}, {duration, v_lon, v_lat, omega}});
}

TrajectorySample Trajectory::at(double t) const
{
  if (t <= samples_.front().t) {
    auto s = samples_.front();
    s.t = t;
    return s;
  }
  if (t >= samples_.back().t) {
    auto s = samples_.back();
    s.t = t;
    return s;
  }
  const auto it = std::upper_bound(
    samples_.begin(), samples_.end(), t, [](double v, const TrajectorySample & s) { return v < s.t; });
  const auto & b = *it;
  const auto & a = *(it - 1);
  const double alpha = (t - a.t) / (b.t - a.t);
  return {
    t, a.v_lon + alpha * (b.v_lon - a.v_lon), a.v_lat + alpha * (b.v_lat - a.v_lat),
    a.omega + alpha * (b.omega - a.omega)};
}

Trajectory racing_trajectory(
  double duration, double v_min, double v_max, double turn_rate, double segment_length)
{
  constexpr double kStep = 0.05;
  constexpr double kRamp = 0.4;     // seconds to enter or leave a turn
  constexpr double kPeriod = 4.0;   // speed oscillation period
  const double mid = 0.5 * (v_min + v_max);
  const double amp = 0.5 * (v_max - v_min);
  std::vector<TrajectorySample> samples;
  const auto n = static_cast<std::size_t>(std::ceil(duration / kStep));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = std::min(i * kStep, duration);
    if (!samples.empty() && t <= samples.back().t) {
      break;
    }
    const double speed = mid - amp * std::cos(2.0 * std::numbers::pi * t / kPeriod);
    // Even segments drive straight, odd segments turn; alternate turn direction.
    const double seg = t / segment_length;
    const auto k = static_cast<long>(std::floor(seg));
    const double into = (seg - k) * segment_length;
    double omega = 0.0;
    if (k % 2 == 1) {
      const double ramp = std::min({1.0, into / kRamp, (segment_length - into) / kRamp});
      omega = ((k / 2) % 2 == 0 ? 1.0 : -1.0) * turn_rate * std::max(ramp, 0.0);
    }
    // mild side slip proportional to lateral acceleration
    const double v_lat = 0.02 * speed * omega;
    samples.push_back({t, speed, v_lat, omega});
  }
  return Trajectory(std::move(samples));
}

struct Texture::Tiles
{
  std::unordered_map<std::uint64_t, std::vector<float>> map;
  std::uint64_t last_key = ~std::uint64_t{0};
  const float * last = nullptr;
};

Texture::Texture(TextureSpec spec) : spec_(spec), tiles_(std::make_unique<Tiles>()) {}
Texture::~Texture() = default;
Texture::Texture(Texture &&) noexcept = default;
Texture & Texture::operator=(Texture &&) noexcept = default;

float Texture::evaluate(std::int64_t i, std::int64_t j) const
{
  const double x = static_cast<double>(i);
  const double y = static_cast<double>(j);
  double value = 0.0;
  switch (spec_.kind) {
    case TextureKind::noise: {
      const double l = std::max(spec_.cutoff_px, 1.0);
      value = 0.6 * value_noise(spec_.seed, x, y, l, 1) + 0.4 * value_noise(spec_.seed, x, y, 0.5 * l, 2);
      // stretch the mid-heavy sum back towards [0, 1]
      value = std::clamp(0.5 + 1.8 * (value - 0.5), 0.0, 1.0);
      break;
    }
    case TextureKind::checker: {
      const double p = spec_.checker_period_px;
      const auto a = static_cast<std::int64_t>(std::floor(x / p));
      const auto b = static_cast<std::int64_t>(std::floor(y / p));
      value = ((a + b) & 1) ? 1.0 : 0.0;
      break;
    }
    case TextureKind::dots: {
      const double cell = 1.0 / std::sqrt(spec_.dot_density);
      const auto ci = static_cast<std::int64_t>(std::floor(x / cell));
      const auto cj = static_cast<std::int64_t>(std::floor(y / cell));
      const double reach = spec_.dot_radius_px + 0.5;
      for (std::int64_t dj = -1; dj <= 1; ++dj) {
        for (std::int64_t di = -1; di <= 1; ++di) {
          const std::int64_t a = ci + di;
          const std::int64_t b = cj + dj;
          const double px = (static_cast<double>(a) + hash01(spec_.seed, a, b, 11)) * cell;
          const double py = (static_cast<double>(b) + hash01(spec_.seed, a, b, 12)) * cell;
          const double d = std::hypot(x - px, y - py);
          value = std::max(value, std::clamp(reach - d, 0.0, 1.0));
        }
      }
      break;
    }
  }
  return static_cast<float>(spec_.intensity_min + (spec_.intensity_max - spec_.intensity_min) * value);
}

const float * Texture::tile(std::int64_t ti, std::int64_t tj)
{
  const std::uint64_t key =
    (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ti)) << 32) | static_cast<std::uint32_t>(tj);
  if (tiles_->last != nullptr && key == tiles_->last_key) {
    return tiles_->last;
  }
  auto it = tiles_->map.find(key);
  if (it == tiles_->map.end()) {
    std::vector<float> data(kTileSize * kTileSize);
    for (int y = 0; y < kTileSize; ++y) {
      for (int x = 0; x < kTileSize; ++x) {
        data[y * kTileSize + x] = evaluate(ti * kTileSize + x, tj * kTileSize + y);
      }
    }
    it = tiles_->map.emplace(key, std::move(data)).first;
  }
  tiles_->last_key = key;
  tiles_->last = it->second.data();
  return tiles_->last;
}

float Texture::lattice(std::int64_t i, std::int64_t j)
{
  const float * t = tile(i >> kTileBits, j >> kTileBits);
  return t[(j & (kTileSize - 1)) * kTileSize + (i & (kTileSize - 1))];
}

float Texture::sample(double u, double v)
{
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const auto i = static_cast<std::int64_t>(fu);
  const auto j = static_cast<std::int64_t>(fv);
  const double au = u - fu;
  const double av = v - fv;
  const double top = (1 - au) * lattice(i, j) + au * lattice(i + 1, j);
  const double bottom = (1 - au) * lattice(i, j + 1) + au * lattice(i + 1, j + 1);
  return static_cast<float>((1 - av) * top + av * bottom);
}

AxisMapping simulator_axis_mapping()
{
  // image +x is vehicle right (-y) and image +y is vehicle rear (-x); the ground
  // flow is opposite to the camera motion, so flow +x reads as +y and flow +y as +x.
  return AxisMapping::parse("+y", "+x");
}

ImageF render_plane(Texture & texture, const Pose2 & pose, const CameraModel & cam)
{
  const int w = cam.width;
  const int h = cam.height;
  const double k = cam.f_px / cam.height_z;
  // Texture coordinate of pixel u: c + k * M P + R(-yaw) (u - c), with M the
  // world-to-image axis flip [[0, -1], [-1, 0]].
  const double cs = std::cos(-pose.yaw);
  const double sn = std::sin(-pose.yaw);
  const double ox = cam.cx - k * pose.y;
  const double oy = cam.cy - k * pose.x;
  auto tex_coord = [&](double u, double v) {
    const double du = u - cam.cx;
    const double dv = v - cam.cy;
    return std::pair{ox + cs * du - sn * dv, oy + sn * du + cs * dv};
  };

  // Gather the lattice patch covering the footprint once.
  double min_u = 1e300, max_u = -1e300, min_v = 1e300, max_v = -1e300;
  for (const auto & [u, v] : {std::pair{0.0, 0.0}, {w - 1.0, 0.0}, {0.0, h - 1.0}, {w - 1.0, h - 1.0}}) {
    const auto [tu, tv] = tex_coord(u, v);
    min_u = std::min(min_u, tu);
    max_u = std::max(max_u, tu);
    min_v = std::min(min_v, tv);
    max_v = std::max(max_v, tv);
  }
  const auto i0 = static_cast<std::int64_t>(std::floor(min_u)) - 1;
  const auto j0 = static_cast<std::int64_t>(std::floor(min_v)) - 1;
  const auto pw = static_cast<std::int64_t>(std::floor(max_u)) + 2 - i0 + 1;
  const auto ph = static_cast<std::int64_t>(std::floor(max_v)) + 2 - j0 + 1;
  std::vector<float> patch(static_cast<std::size_t>(pw * ph));
  for (std::int64_t j = 0; j < ph; ++j) {
    for (std::int64_t i = 0; i < pw; ++i) {
      patch[j * pw + i] = texture.lattice(i0 + i, j0 + j);
    }
  }

  ImageF out(w, h);
  for (int y = 0; y < h; ++y) {
    float * row = out.row(y);
    for (int x = 0; x < w; ++x) {
      const auto [tu, tv] = tex_coord(x, y);
      const double fu = std::floor(tu);
      const double fv = std::floor(tv);
      const auto i = static_cast<std::int64_t>(fu) - i0;
      const auto j = static_cast<std::int64_t>(fv) - j0;
      const double au = tu - fu;
      const double av = tv - fv;
      const float * p0 = &patch[j * pw + i];
      const float * p1 = p0 + pw;
      const double top = (1 - au) * p0[0] + au * p0[1];
      const double bottom = (1 - au) * p1[0] + au * p1[1];
      row[x] = static_cast<float>(std::log((1 - av) * top + av * bottom));
    }
  }
  return out;
}

void SimConfig::validate() const
{
  cam.validate();
  ext.validate();
  if (!(contrast_threshold > 0.0)) {
    throw Error(ErrorKind::config, "contrast threshold must be positive");
  }
  if (noise_rate < 0.0 || !(duration > 0.0) || !(time_step > 0.0)) {
    throw Error(ErrorKind::config, "simulation needs noise_rate >= 0, duration > 0 and time_step > 0");
  }
  if (!(texture.intensity_min > 0.0 && texture.intensity_max > texture.intensity_min)) {
    throw Error(ErrorKind::config, "texture intensities must satisfy 0 < min < max");
  }
  if (texture.kind == TextureKind::dots && !(texture.dot_density > 0.0)) {
    throw Error(ErrorKind::config, "dot density must be positive");
  }
  if (texture.kind == TextureKind::checker && !(texture.checker_period_px > 0.0)) {
    throw Error(ErrorKind::config, "checker period must be positive");
  }
}

namespace
{
struct PoseRate
{
  double dx, dy, dyaw;
};

PoseRate pose_rate(const Trajectory & traj, const Pose2 & p, double t)
{
  const auto s = traj.at(t);
  const double c = std::cos(p.yaw);
  const double sn = std::sin(p.yaw);
  return {c * s.v_lon - sn * s.v_lat, sn * s.v_lon + c * s.v_lat, s.omega};
}

// Classic RK4 from t0 to t1 in steps no longer than 100 us.
Pose2 integrate(const Trajectory & traj, Pose2 p, double t0, double t1)
{
  const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / 1e-4)));
  const double h = (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * h;
    auto shifted = [&](const PoseRate & r, double s) {
      return Pose2{p.x + s * r.dx, p.y + s * r.dy, p.yaw + s * r.dyaw};
    };
    const auto k1 = pose_rate(traj, p, t);
    const auto k2 = pose_rate(traj, shifted(k1, 0.5 * h), t + 0.5 * h);
    const auto k3 = pose_rate(traj, shifted(k2, 0.5 * h), t + 0.5 * h);
    const auto k4 = pose_rate(traj, shifted(k3, h), t + h);
    p.x += h / 6.0 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
    p.y += h / 6.0 * (k1.dy + 2 * k2.dy + 2 * k3.dy + k4.dy);
    p.yaw += h / 6.0 * (k1.dyaw + 2 * k2.dyaw + 2 * k3.dyaw + k4.dyaw);
  }
  return p;
}

Timestamp to_us(double t) { return static_cast<Timestamp>(std::llround(t * 1e6)); }

}  // namespace

std::vector<Pose2> integrate_poses(const Trajectory & traj, const std::vector<double> & times)
{
  std::vector<Pose2> out;
  out.reserve(times.size());
  Pose2 p;
  double t = 0.0;
  for (double ti : times) {
    if (ti < t) {
      throw Error(ErrorKind::contract, "pose times must be ascending");
    }
    p = integrate(traj, p, t, ti);
    t = ti;
    out.push_back(p);
  }
  return out;
}

SimOutput generate_events(const SimConfig & cfg, const Trajectory & traj)
{
  cfg.validate();
  if (traj.start() > 0.0 || traj.end() < cfg.duration) {
    throw Error(
      ErrorKind::contract, fmt::format(
                             "trajectory covers [{}, {}] s but the simulation needs [0, {}] s", traj.start(),
                             traj.end(), cfg.duration));
  }
  const int w = cfg.cam.width;
  const int h = cfg.cam.height;
  const double c = cfg.contrast_threshold;
  Texture texture(cfg.texture);
  std::mt19937_64 rng(mix(cfg.seed ^ 0x5EEDull));

  SimOutput out;
  Pose2 pose = cfg.start_pose;
  ImageF prev = render_plane(texture, pose, cfg.cam);
  Grid<double> ref(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      ref(x, y) = prev(x, y);
    }
  }

  const auto steps = static_cast<std::size_t>(std::ceil(cfg.duration / cfg.time_step - 1e-9));
  std::vector<Event> batch;
  std::vector<double> gt_times;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * cfg.time_step;
    const double t1 = std::min(static_cast<double>(k) * cfg.time_step, cfg.duration);
    pose = integrate(traj, pose, t0, t1);
    ImageF next = render_plane(texture, pose, cfg.cam);
    batch.clear();
    // substep owns [t0, t1) in whole microseconds
    const Timestamp us0 = to_us(t0);
    const Timestamp us1 = std::max(us0, to_us(t1) - 1);
    auto stamp = [&](double t) { return std::clamp(to_us(t), us0, us1); };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double lp = prev(x, y);
        const double ln = next(x, y);
        double r = ref(x, y);
        const double span = ln - lp;
        while (ln - r >= c) {
          r += c;
          const double a = std::clamp((r - lp) / span, 0.0, 1.0);
          batch.push_back({stamp(t0 + a * (t1 - t0)), static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), 1});
        }
        while (r - ln >= c) {
          r -= c;
          const double a = std::clamp((r - lp) / span, 0.0, 1.0);
          batch.push_back({stamp(t0 + a * (t1 - t0)), static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), -1});
        }
        ref(x, y) = r;
      }
    }
    if (cfg.noise_rate > 0.0) {
      std::poisson_distribution<long> count(cfg.noise_rate * w * h * (t1 - t0));
      std::uniform_int_distribution<int> px(0, w - 1);
      std::uniform_int_distribution<int> py(0, h - 1);
      std::uniform_real_distribution<double> when(t0, t1);
      std::bernoulli_distribution sign(0.5);
      const long n = count(rng);
      for (long i = 0; i < n; ++i) {
        const auto x = static_cast<std::uint16_t>(px(rng));
        const auto y = static_cast<std::uint16_t>(py(rng));
        const double t = when(rng);
        const std::int8_t p = sign(rng) ? 1 : -1;
        batch.push_back({stamp(t), x, y, p});
      }
    }
    std::stable_sort(batch.begin(), batch.end(), [](const Event & a, const Event & b) { return a.t < b.t; });
    out.events.insert(out.events.end(), batch.begin(), batch.end());
    prev = std::move(next);
    if (cfg.gt_rate_hz <= 0.0) {
      gt_times.push_back(t1);
    }
  }

  if (cfg.gt_rate_hz > 0.0) {
    for (std::size_t j = 0;; ++j) {
      const double t = static_cast<double>(j) / cfg.gt_rate_hz;
      if (t > cfg.duration + 1e-12) {
        break;
      }
      gt_times.push_back(t);
    }
  } else {
    gt_times.insert(gt_times.begin(), 0.0);
  }
  for (double t : gt_times) {
    const auto s = traj.at(t);
    CameraVelocity cv;
    cv.v_c = {s.v_lon, s.v_lat};
    cv.omega = s.omega;
    cv.t_mid = t;
    VelocityEstimate gt = transform_to_axle(cv, cfg.ext);
    gt.omega_source = OmegaSource::truth;
    gt.quality.inlier_fraction = 1.0;
    out.ground_truth.push_back(gt);
  }

  if (cfg.imu_rate_hz > 0.0) {
    for (std::size_t j = 0;; ++j) {
      const double t = static_cast<double>(j) / cfg.imu_rate_hz;
      if (t > cfg.duration + 1e-12) {
        break;
      }
      out.imu.push_back({to_us(t), traj.at(t).omega + cfg.imu_bias});
    }
  }
  return out;
}

FlowField inject_outliers(const FlowField & field, double fraction, double magnitude, std::uint64_t seed)
{
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::contract, fmt::format("outlier fraction must lie in [0, 1], got {}", fraction));
  }
  FlowField out = field;
  std::vector<std::size_t> valid;
  const auto mask = field.valid.values();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      valid.push_back(i);
    }
  }
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(valid.size())));
  std::mt19937_64 rng(mix(seed));
  // partial Fisher-Yates: the first n entries become the replaced subset
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, valid.size() - 1);
    std::swap(valid[i], valid[pick(rng)]);
  }
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  auto u = out.u.values();
  auto v = out.v.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = angle(rng);
    u[valid[i]] = static_cast<float>(magnitude * std::cos(a));
    v[valid[i]] = static_cast<float>(magnitude * std::sin(a));
  }
  return out;
}

}  // namespace groundflow
