#include "scenario.hpp"

#include <array>
#include <cmath>
#include <string_view>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow::tools
{

namespace
{

constexpr std::string_view kSimKeys[] = {
  "sim.duration_s", "sim.time_step_s", "sim.contrast_threshold", "sim.noise_rate_hz", "sim.gt_rate_hz",
  "sim.imu_rate_hz", "sim.imu_bias", "sim.seed", "sim.events_format",
  "texture.kind", "texture.seed", "texture.cutoff_px", "texture.checker_period_px", "texture.dot_density",
  "texture.dot_radius_px", "texture.intensity_min", "texture.intensity_max",
  "trajectory.kind", "trajectory.v_lon", "trajectory.v_lat", "trajectory.omega", "trajectory.v_min",
  "trajectory.v_max", "trajectory.turn_rate", "trajectory.segment_s",
};

void check_scenario_keys(const KeyValueConfig & kv)
{
  for (const auto & [key, value] : kv.values()) {
    const auto section = key.substr(0, key.find('.'));
    if (section != "sim" && section != "texture" && section != "trajectory") {
      continue;
    }
    bool known = false;
    for (auto k : kSimKeys) {
      known = known || k == key;
    }
    if (!known) {
      throw Error(ErrorKind::config, fmt::format("unknown scenario key '{}'", key));
    }
  }
}

TextureKind texture_kind(const std::string & s)
{
  if (s == "noise") {
    return TextureKind::noise;
  }
  if (s == "checker") {
    return TextureKind::checker;
  }
  if (s == "dots") {
    return TextureKind::dots;
  }
  throw Error(ErrorKind::config, fmt::format("texture.kind must be noise, checker or dots, got '{}'", s));
}

}  // namespace

Scenario load_scenario(const KeyValueConfig & kv)
{
  check_scenario_keys(kv);
  Scenario s;
  s.run = RunConfig::from_kv(kv);

  const auto seed = seed_override();
  auto & sim = s.sim;
  sim.cam = s.run.camera;
  sim.ext = s.run.ext;
  sim.duration = kv.get_double("sim.duration_s", 1.0);
  sim.time_step = kv.get_double("sim.time_step_s", s.run.window_seconds() / 8.0);
  sim.contrast_threshold = kv.get_double("sim.contrast_threshold", sim.contrast_threshold);
  sim.noise_rate = kv.get_double("sim.noise_rate_hz", sim.noise_rate);
  sim.gt_rate_hz = kv.get_double("sim.gt_rate_hz", sim.gt_rate_hz);
  sim.imu_rate_hz = kv.get_double("sim.imu_rate_hz", sim.imu_rate_hz);
  sim.imu_bias = kv.get_double("sim.imu_bias", sim.imu_bias);
  sim.seed = seed.value_or(static_cast<std::uint64_t>(kv.get_int("sim.seed", 1)));

  auto & tex = sim.texture;
  tex.kind = texture_kind(kv.get_string("texture.kind", "noise"));
  tex.seed = seed.value_or(static_cast<std::uint64_t>(kv.get_int("texture.seed", 1)));
  tex.cutoff_px = kv.get_double("texture.cutoff_px", tex.cutoff_px);
  tex.checker_period_px = kv.get_double("texture.checker_period_px", tex.checker_period_px);
  tex.dot_density = kv.get_double("texture.dot_density", tex.dot_density);
  tex.dot_radius_px = kv.get_double("texture.dot_radius_px", tex.dot_radius_px);
  tex.intensity_min = kv.get_double("texture.intensity_min", tex.intensity_min);
  tex.intensity_max = kv.get_double("texture.intensity_max", tex.intensity_max);
  sim.validate();

  const auto format = kv.get_string("sim.events_format", "binary");
  if (format != "binary" && format != "csv") {
    throw Error(ErrorKind::config, fmt::format("sim.events_format must be binary or csv, got '{}'", format));
  }
  s.csv_events = format == "csv";

  const auto kind = kv.get_string("trajectory.kind", "constant");
  try {
    if (kind == "constant") {
      s.trajectory = Trajectory::constant(
        sim.duration, kv.get_double("trajectory.v_lon", 0.0), kv.get_double("trajectory.v_lat", 0.0),
        kv.get_double("trajectory.omega", 0.0));
    } else if (kind == "racing") {
      s.trajectory = racing_trajectory(
        sim.duration, kv.get_double("trajectory.v_min", 0.5), kv.get_double("trajectory.v_max", 2.5),
        kv.get_double("trajectory.turn_rate", 1.0), kv.get_double("trajectory.segment_s", 1.5));
    } else {
      throw Error(ErrorKind::config, fmt::format("trajectory.kind must be constant or racing, got '{}'", kind));
    }
  } catch (const Error & e) {
    if (e.kind() == ErrorKind::config) {
      throw;
    }
    throw Error(ErrorKind::config, fmt::format("trajectory: {}", e.what()));
  }

  // The simulated camera is mounted one way, and every window must be whole
  // so the last events still fall inside the declared range.
  const double duration_us = sim.duration * 1e6;
  const auto windows = std::llround(duration_us / static_cast<double>(s.run.accum.window));
  if (windows < 2 || std::abs(duration_us - static_cast<double>(windows * s.run.accum.window)) > 0.5) {
    throw Error(
      ErrorKind::config,
      fmt::format("sim.duration_s must be a whole number (>= 2) of {} us windows", s.run.accum.window));
  }
  s.run.mapping = simulator_axis_mapping();
  s.run.t_begin = 0;
  s.run.t_end = windows * s.run.accum.window;
  return s;
}

}  // namespace groundflow::tools
