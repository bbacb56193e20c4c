#include "groundflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
namespace
{
std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string_view section_of(std::string_view key)
{
  const auto dot = key.find('.');
  return dot == std::string_view::npos ? std::string_view{} : key.substr(0, dot);
}

bool contains(std::span<const std::string_view> list, std::string_view s)
{
  return std::find(list.begin(), list.end(), s) != list.end();
}

}  // namespace

std::string format_double(double value)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

KeyValueConfig KeyValueConfig::parse(std::istream & in, const std::string & source)
{
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) {
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, fmt::format("{}:{}: expected 'key = value'", source, n));
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorKind::config, fmt::format("{}:{}: empty key", source, n));
    }
    if (cfg.values_.count(key)) {
      throw Error(ErrorKind::config, fmt::format("{}:{}: duplicate key '{}'", source, n, key));
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::config, fmt::format("cannot open config '{}'", path.string()));
  }
  return parse(in, path.string());
}

std::optional<std::string> KeyValueConfig::get(const std::string & key) const
{
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string & key, const std::string & fallback) const
{
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string & key, double fallback) const
{
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  double out = 0.0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size()) {
    throw Error(ErrorKind::config, fmt::format("{}: '{}' is not a number: '{}'", source_, key, *v));
  }
  return out;
}

std::int64_t KeyValueConfig::get_int(const std::string & key, std::int64_t fallback) const
{
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  std::int64_t out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size()) {
    throw Error(ErrorKind::config, fmt::format("{}: '{}' is not an integer: '{}'", source_, key, *v));
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string & key, bool fallback) const
{
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
    return true;
  }
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
    return false;
  }
  throw Error(ErrorKind::config, fmt::format("{}: '{}' is not a boolean: '{}'", source_, key, *v));
}

void KeyValueConfig::set(const std::string & key, const std::string & value) { values_[key] = value; }
void KeyValueConfig::set_double(const std::string & key, double value) { values_[key] = format_double(value); }
void KeyValueConfig::set_int(const std::string & key, std::int64_t value) { values_[key] = std::to_string(value); }
void KeyValueConfig::set_bool(const std::string & key, bool value) { values_[key] = value ? "true" : "false"; }

void KeyValueConfig::merge(const KeyValueConfig & other)
{
  for (const auto & [k, v] : other.values_) {
    values_[k] = v;
  }
}

void KeyValueConfig::check_keys(
  std::span<const std::string_view> owned, std::span<const std::string_view> known,
  std::span<const std::string_view> foreign) const
{
  for (const auto & [key, value] : values_) {
    const auto section = section_of(key);
    if (contains(owned, section)) {
      if (!contains(known, key)) {
        throw Error(ErrorKind::config, fmt::format("{}: unknown key '{}'", source_, key));
      }
    } else if (!contains(foreign, section)) {
      throw Error(ErrorKind::config, fmt::format("{}: unknown section in key '{}'", source_, key));
    }
  }
}

std::string KeyValueConfig::serialize() const
{
  std::string out;
  for (const auto & [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueConfig::save(const std::filesystem::path & path) const
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::config, fmt::format("cannot write config '{}'", path.string()));
  }
  out << serialize();
}

namespace
{
constexpr std::string_view kOwned[] = {
  "paths", "accum", "sensor", "camera", "flow", "ransac", "run", "mount", "vehicle", "omega", "eval",
  "pipeline", "fault"};

constexpr std::string_view kKnown[] = {
  "paths.events", "paths.imu", "paths.ground_truth", "paths.output_dir",
  "accum.window_us", "accum.count_cap", "accum.polarity", "accum.start_us", "accum.end_us",
  "sensor.width", "sensor.height",
  "camera.f_px", "camera.fov_deg", "camera.cx", "camera.cy", "camera.height_z",
  "flow.levels", "flow.scale", "flow.window", "flow.iterations", "flow.poly_n", "flow.poly_sigma",
  "flow.stride",
  "ransac.enabled", "ransac.iterations", "ransac.threshold_px", "ransac.min_inlier_fraction",
  "run.seed",
  "mount.image_x", "mount.image_y",
  "vehicle.ca_x", "vehicle.ca_y",
  "omega.source", "omega.imu_staleness_windows",
  "eval.tolerance_s",
  "pipeline.workers",
  "fault.omega_bias", "fault.outlier_fraction", "fault.outlier_magnitude_px"};

// Sections read by other commands (the simulator, plotting) that may share a file.
constexpr std::string_view kForeign[] = {"sim", "texture", "trajectory", "blur"};

std::filesystem::path resolve(const std::filesystem::path & base, const std::string & p)
{
  if (p.empty()) {
    return {};
  }
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

int to_int(std::int64_t v, const char * key)
{
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw Error(ErrorKind::config, fmt::format("'{}' is out of range", key));
  }
  return static_cast<int>(v);
}

}  // namespace

RunConfig RunConfig::from_kv(const KeyValueConfig & kv, const std::filesystem::path & base_dir)
{
  kv.check_keys(kOwned, kKnown, kForeign);
  RunConfig c;
  c.events = resolve(base_dir, kv.get_string("paths.events", ""));
  c.imu = resolve(base_dir, kv.get_string("paths.imu", ""));
  c.ground_truth = resolve(base_dir, kv.get_string("paths.ground_truth", ""));
  c.output_dir = resolve(base_dir, kv.get_string("paths.output_dir", "."));

  c.accum.width = to_int(kv.get_int("sensor.width", 346), "sensor.width");
  c.accum.height = to_int(kv.get_int("sensor.height", 260), "sensor.height");
  c.accum.window = kv.get_int("accum.window_us", c.accum.window);
  const auto cap = kv.get_int("accum.count_cap", c.accum.count_cap);
  if (cap < 1 || cap > 65535) {
    throw Error(ErrorKind::config, "accum.count_cap must lie in [1, 65535]");
  }
  c.accum.count_cap = static_cast<std::uint16_t>(cap);
  const auto pol = kv.get_string("accum.polarity", "merged");
  if (pol == "merged") {
    c.polarity = PolarityChannels::merged;
  } else if (pol == "split") {
    c.polarity = PolarityChannels::split;
  } else {
    throw Error(ErrorKind::config, fmt::format("accum.polarity must be 'merged' or 'split', got '{}'", pol));
  }
  if (kv.has("accum.start_us")) {
    c.t_begin = kv.get_int("accum.start_us", 0);
  }
  if (kv.has("accum.end_us")) {
    c.t_end = kv.get_int("accum.end_us", 0);
  }

  const double z = kv.get_double("camera.height_z", 0.6);
  if (kv.has("camera.f_px")) {
    c.camera = CameraModel::from_focal(c.accum.width, c.accum.height, kv.get_double("camera.f_px", 0), z);
    if (kv.has("camera.fov_deg")) {
      c.camera.fov_alpha = kv.get_double("camera.fov_deg", 0) * std::numbers::pi / 180.0;
    }
  } else {
    const double fov = kv.get_double("camera.fov_deg", 60.0) * std::numbers::pi / 180.0;
    c.camera = CameraModel::from_fov(c.accum.width, c.accum.height, fov, z);
  }
  c.camera.cx = kv.get_double("camera.cx", c.camera.cx);
  c.camera.cy = kv.get_double("camera.cy", c.camera.cy);

  c.flow.pyramid_levels = to_int(kv.get_int("flow.levels", c.flow.pyramid_levels), "flow.levels");
  c.flow.pyramid_scale = kv.get_double("flow.scale", c.flow.pyramid_scale);
  c.flow.window_size = to_int(kv.get_int("flow.window", c.flow.window_size), "flow.window");
  c.flow.iterations = to_int(kv.get_int("flow.iterations", c.flow.iterations), "flow.iterations");
  c.flow.poly_n = to_int(kv.get_int("flow.poly_n", c.flow.poly_n), "flow.poly_n");
  c.flow.poly_sigma = kv.get_double("flow.poly_sigma", c.flow.poly_sigma);
  c.flow_stride = to_int(kv.get_int("flow.stride", c.flow_stride), "flow.stride");

  c.ransac.enabled = kv.get_bool("ransac.enabled", c.ransac.enabled);
  c.ransac.iterations = to_int(kv.get_int("ransac.iterations", c.ransac.iterations), "ransac.iterations");
  c.ransac.inlier_threshold = kv.get_double("ransac.threshold_px", c.ransac.inlier_threshold);
  c.ransac.min_inlier_fraction = kv.get_double("ransac.min_inlier_fraction", c.ransac.min_inlier_fraction);
  c.seed = static_cast<std::uint64_t>(kv.get_int("run.seed", static_cast<std::int64_t>(c.seed)));

  c.mapping = AxisMapping::parse(kv.get_string("mount.image_x", "+x"), kv.get_string("mount.image_y", "+y"));
  c.ext.ca = {kv.get_double("vehicle.ca_x", 0.0), kv.get_double("vehicle.ca_y", 0.0)};

  const auto src = kv.get_string("omega.source", "flow");
  if (src == "flow") {
    c.omega_source = OmegaSource::flow;
  } else if (src == "imu") {
    c.omega_source = OmegaSource::imu;
  } else {
    throw Error(ErrorKind::config, fmt::format("omega.source must be 'flow' or 'imu', got '{}'", src));
  }
  c.imu_staleness_windows = kv.get_double("omega.imu_staleness_windows", c.imu_staleness_windows);
  c.eval_tolerance = kv.get_double("eval.tolerance_s", c.eval_tolerance);
  c.workers = to_int(kv.get_int("pipeline.workers", c.workers), "pipeline.workers");
  c.omega_bias = kv.get_double("fault.omega_bias", c.omega_bias);
  c.outlier_fraction = kv.get_double("fault.outlier_fraction", c.outlier_fraction);
  c.outlier_magnitude = kv.get_double("fault.outlier_magnitude_px", c.outlier_magnitude);
  c.validate();
  return c;
}

KeyValueConfig RunConfig::to_kv() const
{
  KeyValueConfig kv;
  auto set_path = [&](const char * key, const std::filesystem::path & p) {
    if (!p.empty()) {
      kv.set(key, p.generic_string());
    }
  };
  set_path("paths.events", events);
  set_path("paths.imu", imu);
  set_path("paths.ground_truth", ground_truth);
  set_path("paths.output_dir", output_dir);
  kv.set_int("sensor.width", accum.width);
  kv.set_int("sensor.height", accum.height);
  kv.set_int("accum.window_us", accum.window);
  kv.set_int("accum.count_cap", accum.count_cap);
  kv.set("accum.polarity", polarity == PolarityChannels::merged ? "merged" : "split");
  if (t_begin) {
    kv.set_int("accum.start_us", *t_begin);
  }
  if (t_end) {
    kv.set_int("accum.end_us", *t_end);
  }
  kv.set_double("camera.f_px", camera.f_px);
  if (camera.fov_alpha != CameraModel::from_focal(camera.width, camera.height, camera.f_px, camera.height_z).fov_alpha) {
    kv.set_double("camera.fov_deg", camera.fov_alpha * 180.0 / std::numbers::pi);
  }
  kv.set_double("camera.cx", camera.cx);
  kv.set_double("camera.cy", camera.cy);
  kv.set_double("camera.height_z", camera.height_z);
  kv.set_int("flow.levels", flow.pyramid_levels);
  kv.set_double("flow.scale", flow.pyramid_scale);
  kv.set_int("flow.window", flow.window_size);
  kv.set_int("flow.iterations", flow.iterations);
  kv.set_int("flow.poly_n", flow.poly_n);
  kv.set_double("flow.poly_sigma", flow.poly_sigma);
  kv.set_int("flow.stride", flow_stride);
  kv.set_bool("ransac.enabled", ransac.enabled);
  kv.set_int("ransac.iterations", ransac.iterations);
  kv.set_double("ransac.threshold_px", ransac.inlier_threshold);
  kv.set_double("ransac.min_inlier_fraction", ransac.min_inlier_fraction);
  kv.set_int("run.seed", static_cast<std::int64_t>(seed));
  kv.set("mount.image_x", mapping.image_x_str());
  kv.set("mount.image_y", mapping.image_y_str());
  kv.set_double("vehicle.ca_x", ext.ca.x);
  kv.set_double("vehicle.ca_y", ext.ca.y);
  kv.set("omega.source", omega_source == OmegaSource::imu ? "imu" : "flow");
  kv.set_double("omega.imu_staleness_windows", imu_staleness_windows);
  kv.set_double("eval.tolerance_s", eval_tolerance);
  kv.set_int("pipeline.workers", workers);
  kv.set_double("fault.omega_bias", omega_bias);
  kv.set_double("fault.outlier_fraction", outlier_fraction);
  kv.set_double("fault.outlier_magnitude_px", outlier_magnitude);
  return kv;
}

void RunConfig::validate() const
{
  accum.validate();
  flow.validate();
  ransac.validate();
  camera.validate();
  ext.validate();
  mapping.validate();
  if (flow_stride < 1) {
    throw Error(ErrorKind::config, "flow.stride must be >= 1");
  }
  if (camera.width != accum.width || camera.height != accum.height) {
    throw Error(ErrorKind::config, "camera and sensor resolution differ");
  }
  if (t_begin && t_end && *t_end <= *t_begin) {
    throw Error(ErrorKind::config, "accum.end_us must be after accum.start_us");
  }
  if (!(imu_staleness_windows > 0.0)) {
    throw Error(ErrorKind::config, "omega.imu_staleness_windows must be positive");
  }
  if (eval_tolerance < 0.0) {
    throw Error(ErrorKind::config, "eval.tolerance_s must be >= 0");
  }
  if (workers < 1 || workers > 256) {
    throw Error(ErrorKind::config, "pipeline.workers must lie in [1, 256]");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0) || !std::isfinite(omega_bias) ||
      !(outlier_magnitude >= 0.0)) {
    throw Error(ErrorKind::config, "fault injection settings out of range");
  }
}

std::optional<std::uint64_t> seed_override()
{
  const char * v = std::getenv(kSeedEnvVar);
  if (v == nullptr || *v == '\0') {
    return std::nullopt;
  }
  std::uint64_t out = 0;
  const char * end = v + std::char_traits<char>::length(v);
  const auto res = std::from_chars(v, end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw Error(ErrorKind::config, fmt::format("{} must be an unsigned integer, got '{}'", kSeedEnvVar, v));
  }
  return out;
}

}  // namespace groundflow
