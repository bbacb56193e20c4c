#include "groundflow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "groundflow/error.hpp"

namespace groundflow
{
PairedErrors pair_with_truth(
  std::span<const VelocityEstimate> estimates, std::span<const VelocityEstimate> truth, double tolerance)
{
  PairedErrors out;
  for (const auto & e : estimates) {
    if (!e.valid || !std::isfinite(e.v_lon) || !std::isfinite(e.v_lat) || !std::isfinite(e.omega)) {
      continue;
    }
    const auto it = std::lower_bound(
      truth.begin(), truth.end(), e.t_mid, [](const VelocityEstimate & g, double t) { return g.t_mid < t; });
    const VelocityEstimate * best = nullptr;
    if (it != truth.end()) {
      best = &*it;
    }
    if (it != truth.begin()) {
      const auto & before = *(it - 1);
      if (best == nullptr || std::abs(before.t_mid - e.t_mid) <= std::abs(best->t_mid - e.t_mid)) {
        best = &before;
      }
    }
    if (best == nullptr || std::abs(best->t_mid - e.t_mid) > tolerance * (1.0 + 1e-12)) {
      ++out.unpaired;
      continue;
    }
    out.t.push_back(e.t_mid);
    out.v_lon.push_back(e.v_lon - best->v_lon);
    out.v_lat.push_back(e.v_lat - best->v_lat);
    out.omega.push_back(e.omega - best->omega);
    out.truth_lon.push_back(best->v_lon);
  }
  return out;
}

ChannelStats channel_stats(std::span<const double> errors)
{
  ChannelStats s;
  s.n = errors.size();
  if (s.n == 0) {
    return s;
  }
  const double n = static_cast<double>(s.n);
  double sum = 0.0;
  double sq = 0.0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
  }
  s.mean_error = sum / n;
  s.rmse = std::sqrt(sq / n);
  double dev = 0.0;
  for (double e : errors) {
    dev += (e - s.mean_error) * (e - s.mean_error);
  }
  s.sigma = std::min(std::sqrt(dev / n), s.rmse);
  return s;
}

LatencyStats latency_stats(std::span<const double> samples_ms)
{
  LatencyStats s;
  s.n = samples_ms.size();
  if (s.n == 0) {
    return s;
  }
  const auto stats = channel_stats(samples_ms);
  s.mean = stats.mean_error;
  s.std = stats.sigma;
  std::vector<double> sorted(samples_ms.begin(), samples_ms.end());
  std::sort(sorted.begin(), sorted.end());
  // nearest-rank percentile
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(s.n)));
  s.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

EvalReport evaluate(
  std::span<const VelocityEstimate> estimates, std::span<const VelocityEstimate> truth, double tolerance)
{
  if (estimates.empty() || truth.empty()) {
    throw Error(ErrorKind::evaluation, "evaluation needs non-empty estimate and ground-truth streams");
  }
  const auto paired = pair_with_truth(estimates, truth, tolerance);
  if (paired.t.empty()) {
    throw Error(
      ErrorKind::evaluation,
      fmt::format("no valid estimate lies within {} s of a ground-truth row", tolerance));
  }
  EvalReport r;
  r.v_lon = channel_stats(paired.v_lon);
  r.v_lat = channel_stats(paired.v_lat);
  r.omega = channel_stats(paired.omega);
  double abs_sum = 0.0;
  for (double v : paired.truth_lon) {
    abs_sum += std::abs(v);
  }
  r.mean_abs_truth_lon = abs_sum / static_cast<double>(paired.truth_lon.size());
  r.rel_error_lon_pct = r.mean_abs_truth_lon > 0.0 ? r.v_lon.rmse / r.mean_abs_truth_lon * 100.0
                                                   : std::numeric_limits<double>::quiet_NaN();
  r.frames = estimates.size();
  r.invalid_frames = static_cast<std::size_t>(
    std::count_if(estimates.begin(), estimates.end(), [](const VelocityEstimate & e) { return !e.valid; }));
  r.unpaired = paired.unpaired;
  return r;
}

void add_latency(EvalReport & report, const std::filesystem::path & latency_csv)
{
  std::ifstream in(latency_csv);
  if (!in) {
    throw Error(ErrorKind::malformed_input, fmt::format("cannot open '{}'", latency_csv.string()));
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::malformed_input, fmt::format("'{}' is empty", latency_csv.string()));
  }
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      names.push_back(col);
    }
  }
  if (names.empty() || names.front() != "frame") {
    throw Error(ErrorKind::malformed_input, fmt::format("'{}' is not a latency CSV", latency_csv.string()));
  }
  std::vector<std::vector<double>> cols(names.size());
  std::vector<double> overhead;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    double stages = 0.0;
    double total = std::numeric_limits<double>::quiet_NaN();
    while (std::getline(ss, cell, ',')) {
      if (i >= names.size()) {
        throw Error(ErrorKind::malformed_input, fmt::format("{}:{}: too many fields", latency_csv.string(), n));
      }
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception &) {
        throw Error(ErrorKind::malformed_input, fmt::format("{}:{}: bad number '{}'", latency_csv.string(), n, cell));
      }
      cols[i].push_back(v);
      if (i > 0 && names[i] == "total_ms") {
        total = v;
      } else if (i > 0) {
        stages += v;
      }
      ++i;
    }
    if (i != names.size()) {
      throw Error(ErrorKind::malformed_input, fmt::format("{}:{}: expected {} fields", latency_csv.string(), n, names.size()));
    }
    if (std::isfinite(total)) {
      overhead.push_back(total - stages);
    }
  }
  for (std::size_t i = 1; i < names.size(); ++i) {
    std::string name = names[i];
    if (name.size() > 3 && name.ends_with("_ms")) {
      name.resize(name.size() - 3);
    }
    report.latency[name] = latency_stats(cols[i]);
  }
  if (!overhead.empty()) {
    report.latency["overhead"] = latency_stats(overhead);
  }
}

std::string format_report(const EvalReport & r)
{
  std::string out;
  out += fmt::format(
    "frames {}  invalid {}  unpaired {}\n", r.frames, r.invalid_frames, r.unpaired);
  out += fmt::format("{:<8} {:>6} {:>12} {:>12} {:>12}\n", "channel", "n", "rmse", "sigma", "mean_err");
  auto row = [&](const char * name, const ChannelStats & s) {
    out += fmt::format("{:<8} {:>6} {:>12.6f} {:>12.6f} {:>12.6f}\n", name, s.n, s.rmse, s.sigma, s.mean_error);
  };
  row("v_lon", r.v_lon);
  row("v_lat", r.v_lat);
  row("omega", r.omega);
  out += fmt::format("E_lon {:.3f} %  (mean |v_lon| {:.4f} m/s)\n", r.rel_error_lon_pct, r.mean_abs_truth_lon);
  if (!r.latency.empty()) {
    out += fmt::format("{:<12} {:>10} {:>10} {:>10}\n", "stage", "mean_ms", "std_ms", "p95_ms");
    for (const auto & [name, s] : r.latency) {
      out += fmt::format("{:<12} {:>10.3f} {:>10.3f} {:>10.3f}\n", name, s.mean, s.std, s.p95);
    }
  }
  return out;
}

std::string report_json(const EvalReport & r)
{
  using nlohmann::json;
  auto channel = [](const ChannelStats & s) {
    return json{{"n", s.n}, {"rmse", s.rmse}, {"sigma", s.sigma}, {"mean_error", s.mean_error}};
  };
  json j;
  j["frames"] = r.frames;
  j["invalid_frames"] = r.invalid_frames;
  j["unpaired"] = r.unpaired;
  j["v_lon"] = channel(r.v_lon);
  j["v_lon"]["rel_error_pct"] = std::isfinite(r.rel_error_lon_pct) ? json(r.rel_error_lon_pct) : json(nullptr);
  j["v_lat"] = channel(r.v_lat);
  j["omega"] = channel(r.omega);
  j["mean_abs_truth_v_lon"] = r.mean_abs_truth_lon;
  json lat = json::object();
  for (const auto & [name, s] : r.latency) {
    lat[name] = {{"n", s.n}, {"mean_ms", s.mean}, {"std_ms", s.std}, {"p95_ms", s.p95}};
  }
  j["latency"] = lat;
  return j.dump(2) + "\n";
}

}  // namespace groundflow
