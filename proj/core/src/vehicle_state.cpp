#include "groundflow/vehicle_state.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "groundflow/error.hpp"

namespace groundflow
{
void Extrinsics::validate() const
{
  if (!std::isfinite(ca.x) || !std::isfinite(ca.y) || ca.norm() >= 10.0) {
    throw Error(ErrorKind::config, fmt::format("camera-to-axle vector ({}, {}) m is implausible", ca.x, ca.y));
  }
}

ImuIndex::ImuIndex() : chunks_(new std::atomic<Chunk *>[kMaxChunks])
{
  for (std::size_t i = 0; i < kMaxChunks; ++i) {
    chunks_[i].store(nullptr, std::memory_order_relaxed);
  }
}

ImuIndex::ImuIndex(std::span<const ImuSample> samples) : ImuIndex()
{
  for (const auto & s : samples) {
    append(s);
  }
}

ImuIndex::~ImuIndex()
{
  for (std::size_t i = 0; i < kMaxChunks; ++i) {
    delete chunks_[i].load(std::memory_order_relaxed);
  }
}

void ImuIndex::append(const ImuSample & s)
{
  const std::size_t n = size_.load(std::memory_order_relaxed);
  if (n > 0 && s.t < at(n - 1).t) {
    throw Error(ErrorKind::ordering, fmt::format("IMU timestamps go backwards at t={} us", s.t));
  }
  const std::size_t c = n >> kChunkBits;
  if (c >= kMaxChunks) {
    throw Error(ErrorKind::contract, "IMU index is full");
  }
  Chunk * chunk = chunks_[c].load(std::memory_order_relaxed);
  if (chunk == nullptr) {
    chunk = new Chunk();
    chunks_[c].store(chunk, std::memory_order_release);
  }
  (*chunk)[n & (kChunkSize - 1)] = s;
  size_.store(n + 1, std::memory_order_release);
}

ImuSample ImuIndex::at(std::size_t i) const
{
  const Chunk * chunk = chunks_[i >> kChunkBits].load(std::memory_order_acquire);
  return (*chunk)[i & (kChunkSize - 1)];
}

std::optional<double> ImuIndex::yaw_rate_at(double t_seconds, double max_staleness) const
{
  const std::size_t n = size();
  if (n == 0) {
    return std::nullopt;
  }
  const double t_us = t_seconds * 1e6;
  const double limit_us = max_staleness * 1e6;
  // first sample with t >= t_us
  std::size_t lo = 0;
  std::size_t hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (static_cast<double>(at(mid).t) < t_us) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == 0 || lo == n) {
    const ImuSample s = at(lo == 0 ? 0 : n - 1);
    if (std::abs(static_cast<double>(s.t) - t_us) > limit_us) {
      return std::nullopt;
    }
    return s.yaw_rate;
  }
  const ImuSample a = at(lo - 1);
  const ImuSample b = at(lo);
  const double da = t_us - static_cast<double>(a.t);
  const double db = static_cast<double>(b.t) - t_us;
  if (std::min(da, db) > limit_us) {
    return std::nullopt;
  }
  const double span = static_cast<double>(b.t - a.t);
  if (span <= 0.0) {
    return b.yaw_rate;
  }
  const double alpha = da / span;
  return a.yaw_rate + alpha * (b.yaw_rate - a.yaw_rate);
}

const char * to_string(OmegaSource s)
{
  switch (s) {
    case OmegaSource::flow:
      return "flow";
    case OmegaSource::imu:
      return "imu";
    case OmegaSource::truth:
      return "truth";
  }
  return "?";
}

const char * to_string(FrameStatus s)
{
  switch (s) {
    case FrameStatus::ok:
      return "ok";
    case FrameStatus::textureless:
      return "textureless";
    case FrameStatus::insufficient_data:
      return "insufficient_data";
    case FrameStatus::degenerate_consensus:
      return "degenerate_consensus";
    case FrameStatus::stale_imu:
      return "stale_imu";
  }
  return "?";
}

VelocityEstimate transform_to_axle(const CameraVelocity & cv, const Extrinsics & ext)
{
  VelocityEstimate out;
  out.t_mid = cv.t_mid;
  // omega x CA with omega along +z
  out.v_lon = cv.v_c.x - cv.omega * ext.ca.y;
  out.v_lat = cv.v_c.y + cv.omega * ext.ca.x;
  out.omega = cv.omega;
  out.omega_source = OmegaSource::flow;
  out.quality = cv.quality;
  out.valid = std::isfinite(out.v_lon) && std::isfinite(out.v_lat) && std::isfinite(out.omega);
  out.status = FrameStatus::ok;
  return out;
}

VelocityEstimate substitute_imu_yaw(
  const CameraVelocity & cv, const ImuIndex & imu, const Extrinsics & ext, double max_staleness)
{
  const auto yaw = imu.yaw_rate_at(cv.t_mid, max_staleness);
  CameraVelocity replaced = cv;
  replaced.omega = yaw.value_or(std::numeric_limits<double>::quiet_NaN());
  VelocityEstimate out = transform_to_axle(replaced, ext);
  out.omega_source = OmegaSource::imu;
  if (!yaw) {
    out.valid = false;
    out.status = FrameStatus::stale_imu;
  }
  return out;
}

namespace
{
std::vector<std::string_view> split_csv(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string_view strip(std::string_view s)
{
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) {
    s.remove_suffix(1);
  }
  while (!s.empty() && s.front() == ' ') {
    s.remove_prefix(1);
  }
  return s;
}

double parse_double(std::string_view s, const std::string & where)
{
  s = strip(s);
  if (s == "nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  // from_chars for double is unavailable on older standard libraries
  std::string tmp(s);
  char * end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    throw Error(ErrorKind::malformed_input, fmt::format("{}: '{}' is not a number", where, tmp));
  }
  return v;
}

std::ifstream open_csv(const std::filesystem::path & path, const std::string & expected_header)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::malformed_input, fmt::format("cannot open '{}'", path.string()));
  }
  std::string header;
  std::getline(in, header);
  if (strip(header) != expected_header) {
    throw Error(
      ErrorKind::malformed_input,
      fmt::format("'{}': expected header '{}', got '{}'", path.string(), expected_header, header));
  }
  return in;
}

constexpr const char * kVelocityHeader = "t_s,v_lon,v_lat,omega,omega_source,n_inliers,inlier_fraction,valid";

std::string fmt_value(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  return fmt::format("{:.9g}", v);
}

}  // namespace

std::vector<ImuSample> read_imu_csv(const std::filesystem::path & path)
{
  auto in = open_csv(path, "t_us,yaw_rate_rad_s");
  std::vector<ImuSample> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) {
      continue;
    }
    const auto f = split_csv(strip(line));
    const std::string where = fmt::format("{}:{}", path.string(), line_no);
    if (f.size() != 2) {
      throw Error(ErrorKind::malformed_input, fmt::format("{}: expected 2 fields", where));
    }
    ImuSample s;
    const auto tf = strip(f[0]);
    const auto [ptr, ec] = std::from_chars(tf.data(), tf.data() + tf.size(), s.t);
    if (ec != std::errc() || ptr != tf.data() + tf.size()) {
      throw Error(ErrorKind::malformed_input, fmt::format("{}: bad timestamp", where));
    }
    s.yaw_rate = parse_double(f[1], where);
    if (!out.empty() && s.t < out.back().t) {
      throw Error(ErrorKind::ordering, fmt::format("{}: IMU timestamps go backwards", where));
    }
    out.push_back(s);
  }
  return out;
}

void write_imu_csv(std::ostream & out, std::span<const ImuSample> samples)
{
  out << "t_us,yaw_rate_rad_s\n";
  for (const auto & s : samples) {
    out << s.t << ',' << fmt_value(s.yaw_rate) << '\n';
  }
}

void write_velocity_csv_header(std::ostream & out) { out << kVelocityHeader << '\n'; }

void write_velocity_csv_row(std::ostream & out, const VelocityEstimate & r)
{
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << fmt::format(
    "{:.6f},{},{},{},{},{},{},{}\n", r.t_mid, fmt_value(r.valid ? r.v_lon : nan),
    fmt_value(r.valid ? r.v_lat : nan), fmt_value(r.valid ? r.omega : nan), to_string(r.omega_source),
    r.quality.n_inliers, fmt_value(r.quality.inlier_fraction), r.valid ? 1 : 0);
}

void write_velocity_csv(std::ostream & out, std::span<const VelocityEstimate> rows)
{
  write_velocity_csv_header(out);
  for (const auto & r : rows) {
    write_velocity_csv_row(out, r);
  }
}

std::vector<VelocityEstimate> read_velocity_csv(const std::filesystem::path & path)
{
  auto in = open_csv(path, kVelocityHeader);
  std::vector<VelocityEstimate> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) {
      continue;
    }
    const std::string where = fmt::format("{}:{}", path.string(), line_no);
    const auto f = split_csv(strip(line));
    if (f.size() != 8) {
      throw Error(ErrorKind::malformed_input, fmt::format("{}: expected 8 fields", where));
    }
    VelocityEstimate r;
    r.t_mid = parse_double(f[0], where);
    r.v_lon = parse_double(f[1], where);
    r.v_lat = parse_double(f[2], where);
    r.omega = parse_double(f[3], where);
    const auto src = strip(f[4]);
    if (src == "flow") {
      r.omega_source = OmegaSource::flow;
    } else if (src == "imu") {
      r.omega_source = OmegaSource::imu;
    } else if (src == "truth") {
      r.omega_source = OmegaSource::truth;
    } else {
      throw Error(ErrorKind::malformed_input, fmt::format("{}: unknown omega source '{}'", where, src));
    }
    r.quality.n_inliers = static_cast<std::size_t>(parse_double(f[5], where));
    r.quality.inlier_fraction = parse_double(f[6], where);
    const auto valid = strip(f[7]);
    if (valid != "0" && valid != "1") {
      throw Error(ErrorKind::malformed_input, fmt::format("{}: valid must be 0 or 1", where));
    }
    r.valid = valid == "1";
    if (!r.valid) {
      r.status = FrameStatus::insufficient_data;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace groundflow
