#ifndef GROUNDFLOW_EVALUATION_HPP
#define GROUNDFLOW_EVALUATION_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "groundflow/vehicle_state.hpp"

namespace groundflow
{
struct ChannelStats
{
  std::size_t n = 0;
  double rmse = 0.0;
  double sigma = 0.0;       // std of the signed error
  double mean_error = 0.0;
};

struct LatencyStats
{
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double p95 = 0.0;
};

struct EvalReport
{
  ChannelStats v_lon;
  ChannelStats v_lat;
  ChannelStats omega;
  double mean_abs_truth_lon = 0.0;
  double rel_error_lon_pct = 0.0;  // RMSE / mean |truth v_lon| * 100

  std::size_t frames = 0;
  std::size_t invalid_frames = 0;
  std::size_t unpaired = 0;  // valid estimates with no truth within tolerance

  std::map<std::string, LatencyStats> latency;  // per stage, milliseconds
};

/// Signed error of each paired channel.
struct PairedErrors
{
  std::vector<double> t;
  std::vector<double> v_lon;
  std::vector<double> v_lat;
  std::vector<double> omega;
  std::vector<double> truth_lon;
  std::size_t unpaired = 0;
};

/// Pairs each valid estimate with the nearest truth row within `tolerance` seconds.
/// `truth` must be sorted by time.
PairedErrors pair_with_truth(
  std::span<const VelocityEstimate> estimates, std::span<const VelocityEstimate> truth,
  double tolerance);

ChannelStats channel_stats(std::span<const double> errors);
LatencyStats latency_stats(std::span<const double> samples_ms);

/// Throws ErrorKind::evaluation when no estimate pairs with the truth.
EvalReport evaluate(
  std::span<const VelocityEstimate> estimates, std::span<const VelocityEstimate> truth,
  double tolerance);

/// Adds per-stage statistics from a latency CSV written by the pipeline.
void add_latency(EvalReport & report, const std::filesystem::path & latency_csv);

std::string format_report(const EvalReport & report);
std::string report_json(const EvalReport & report);

}  // namespace groundflow

#endif  // GROUNDFLOW_EVALUATION_HPP
