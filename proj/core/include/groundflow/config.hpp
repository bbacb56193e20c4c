#ifndef GROUNDFLOW_CONFIG_HPP
#define GROUNDFLOW_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "groundflow/camera.hpp"
#include "groundflow/dense_flow.hpp"
#include "groundflow/event_core.hpp"
#include "groundflow/rigid_motion.hpp"
#include "groundflow/vehicle_state.hpp"

namespace groundflow
{
/// Flat `section.key = value` text. `#` starts a comment; blank lines are ignored.
class KeyValueConfig
{
public:
  static KeyValueConfig parse(std::istream & in, const std::string & source = "<config>");
  static KeyValueConfig load(const std::filesystem::path & path);

  bool has(const std::string & key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string & key) const;

  std::string get_string(const std::string & key, const std::string & fallback) const;
  double get_double(const std::string & key, double fallback) const;
  std::int64_t get_int(const std::string & key, std::int64_t fallback) const;
  bool get_bool(const std::string & key, bool fallback) const;

  void set(const std::string & key, const std::string & value);
  void set_double(const std::string & key, double value);
  void set_int(const std::string & key, std::int64_t value);
  void set_bool(const std::string & key, bool value);

  void merge(const KeyValueConfig & other);

  /// Throws ErrorKind::config for any key whose section is in `owned` but whose
  /// full name is not in `known`, and for any key whose section is in neither
  /// `owned` nor `foreign`.
  void check_keys(
    std::span<const std::string_view> owned, std::span<const std::string_view> known,
    std::span<const std::string_view> foreign) const;

  /// Keys in sorted order, doubles printed with round-trip precision.
  std::string serialize() const;
  void save(const std::filesystem::path & path) const;

  const std::map<std::string, std::string> & values() const { return values_; }

private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

enum class PolarityChannels { merged, split };

struct RunConfig
{
  std::filesystem::path events;
  std::filesystem::path imu;
  std::filesystem::path ground_truth;
  std::filesystem::path output_dir = ".";

  AccumulationConfig accum;
  PolarityChannels polarity = PolarityChannels::merged;
  std::optional<Timestamp> t_begin;  // explicit window range, microseconds
  std::optional<Timestamp> t_end;

  FlowParams flow;
  int flow_stride = 4;
  RansacParams ransac;
  std::uint64_t seed = 1;

  CameraModel camera;
  Extrinsics ext;
  AxisMapping mapping;
  OmegaSource omega_source = OmegaSource::flow;
  double imu_staleness_windows = 2.0;

  double eval_tolerance = 0.0;  // seconds; 0 means half the window
  int workers = 1;

  // Fault injection used by robustness experiments.
  double omega_bias = 0.0;
  double outlier_fraction = 0.0;
  double outlier_magnitude = 50.0;

  static RunConfig from_kv(const KeyValueConfig & kv, const std::filesystem::path & base_dir = {});
  KeyValueConfig to_kv() const;
  void validate() const;

  double window_seconds() const { return 1e-6 * static_cast<double>(accum.window); }
  double tolerance_seconds() const { return eval_tolerance > 0 ? eval_tolerance : 0.5 * window_seconds(); }
};

/// Environment variable that, when set, replaces every configured seed.
inline constexpr const char * kSeedEnvVar = "GROUNDFLOW_SEED";
std::optional<std::uint64_t> seed_override();

}  // namespace groundflow

#endif  // GROUNDFLOW_CONFIG_HPP
