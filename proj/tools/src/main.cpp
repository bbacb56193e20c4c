#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <vector>

#include "groundflow/config.hpp"
#include "groundflow/dense_flow.hpp"
#include "groundflow/error.hpp"
#include "groundflow/evaluation.hpp"
#include "groundflow/event_io.hpp"
#include "groundflow/pipeline.hpp"
#include "groundflow/plots.hpp"
#include "groundflow/synth.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace groundflow;

namespace
{

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, input_error = 3, evaluation_error = 4 };

int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::malformed_input:
    case ErrorKind::ordering:
      return input_error;
    case ErrorKind::evaluation:
      return evaluation_error;
    default:
      return config_error;
  }
}

std::ofstream open_out(const fs::path & path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::config, fmt::format("cannot write '{}'", path.string()));
  }
  return out;
}

void ensure_dir(const fs::path & dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::config, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  }
}

RunConfig load_run(const fs::path & path)
{
  auto kv = KeyValueConfig::load(path);
  auto cfg = RunConfig::from_kv(kv, path.parent_path());
  if (auto s = seed_override()) {
    cfg.seed = *s;
  }
  return cfg;
}

std::vector<VelocityEstimate> read_stream(const fs::path & path)
{
  try {
    return read_velocity_csv(path);
  } catch (const Error & e) {
    if (e.kind() == ErrorKind::ordering || e.kind() == ErrorKind::malformed_input) {
      throw;
    }
    throw Error(ErrorKind::malformed_input, e.what());
  }
}

int cmd_simulate(const fs::path & scenario_path, fs::path out_dir)
{
  const auto kv = KeyValueConfig::load(scenario_path);
  auto sc = tools::load_scenario(kv);
  if (out_dir.empty()) {
    out_dir = sc.run.output_dir;
  }
  ensure_dir(out_dir);

  const auto sim = generate_events(sc.sim, sc.trajectory);
  const fs::path events_name = sc.csv_events ? "events.csv" : "events.bin";
  write_events(out_dir / events_name, sim.events, SensorSize{sc.run.accum.width, sc.run.accum.height});
  {
    auto out = open_out(out_dir / "ground_truth.csv");
    write_velocity_csv(out, sim.ground_truth);
  }
  {
    auto out = open_out(out_dir / "imu.csv");
    write_imu_csv(out, sim.imu);
  }

  auto run = sc.run;
  run.events = events_name;
  run.imu = "imu.csv";
  run.ground_truth = "ground_truth.csv";
  run.output_dir = ".";
  run.to_kv().save(out_dir / "run.cfg");
  fmt::print(
    "simulated {} events, {} ground-truth rows, {} IMU samples -> {}\n", sim.events.size(),
    sim.ground_truth.size(), sim.imu.size(), out_dir.string());
  return ok;
}

int cmd_estimate(const fs::path & config_path, std::optional<fs::path> out_opt, std::optional<int> workers)
{
  auto cfg = load_run(config_path);
  if (workers) {
    cfg.workers = *workers;
    cfg.validate();
  }
  const fs::path out_dir = out_opt.value_or(cfg.output_dir);
  ensure_dir(out_dir);
  if (cfg.events.empty()) {
    throw Error(ErrorKind::config, "paths.events is required");
  }

  std::optional<ImuIndex> imu;
  if (cfg.omega_source == OmegaSource::imu) {
    if (cfg.imu.empty()) {
      throw Error(ErrorKind::config, "omega.source = imu needs paths.imu");
    }
    imu.emplace(read_imu_csv(cfg.imu));
  }

  auto reader = EventFileReader::open(cfg.events, SensorSize{cfg.accum.width, cfg.accum.height});
  auto velocity = open_out(out_dir / "velocity.csv");
  auto frame_log = open_out(out_dir / "frame_log.csv");
  auto latency = open_out(out_dir / "latency.csv");
  write_velocity_csv_header(velocity);
  write_frame_log_header(frame_log);
  write_latency_header(latency);

  const auto summary = run_pipeline(cfg, *reader, imu ? &*imu : nullptr, [&](const FrameRecord & r) {
    write_velocity_csv_row(velocity, r.estimate);
    write_frame_log_row(frame_log, r);
    write_latency_row(latency, r);
  });
  fmt::print(
    "frames_in {} frames_valid {} frames_invalid {}\n", summary.frames_in, summary.frames_valid,
    summary.frames_invalid);
  return ok;
}

struct EvalArgs
{
  fs::path estimates;
  fs::path truth;
  fs::path config;
  fs::path latency;
  fs::path json;
  double tolerance = 0.0;
};

double resolve_tolerance(const EvalArgs & a)
{
  if (a.tolerance > 0.0) {
    return a.tolerance;
  }
  if (!a.config.empty()) {
    return load_run(a.config).tolerance_seconds();
  }
  return RunConfig{}.tolerance_seconds();
}

int cmd_evaluate(const EvalArgs & a)
{
  const double tol = resolve_tolerance(a);
  const auto est = read_stream(a.estimates);
  const auto truth = read_stream(a.truth);
  auto report = evaluate(est, truth, tol);
  if (!a.latency.empty()) {
    add_latency(report, a.latency);
  }
  std::cout << format_report(report);
  if (!a.json.empty()) {
    auto out = open_out(a.json);
    out << report_json(report) << '\n';
  }
  return ok;
}

int cmd_plot(const EvalArgs & a, const fs::path & out_dir)
{
  const double tol = resolve_tolerance(a);
  const auto est = read_stream(a.estimates);
  const auto truth = read_stream(a.truth);
  ensure_dir(out_dir);
  for (const auto & p : emit_plots(est, truth, tol, out_dir)) {
    fmt::print("{}\n", p.string());
  }
  return ok;
}

int cmd_blur_budget(
  const fs::path & config, int width, double fov_deg, double height_z, const std::vector<double> & speeds,
  const std::vector<double> & budgets, const fs::path & out_dir)
{
  CameraModel cam;
  if (!config.empty()) {
    cam = load_run(config).camera;
  } else {
    cam = CameraModel::from_fov(width, width, fov_deg * std::numbers::pi / 180.0, height_z);
  }
  const auto rows = blur_budget_table(speeds, budgets, cam);
  if (out_dir.empty()) {
    write_blur_budget_csv(std::cout, rows);
    return ok;
  }
  ensure_dir(out_dir);
  {
    auto out = open_out(out_dir / "blur_budget.csv");
    write_blur_budget_csv(out, rows);
  }
  auto out = open_out(out_dir / "blur_budget.svg");
  write_blur_budget_svg(out, rows);
  return ok;
}

int cmd_flow_debug(const fs::path & config, std::size_t frame, int stride, const fs::path & out_dir)
{
  const auto cfg = load_run(config);
  if (frame < 1) {
    throw Error(ErrorKind::config, "--frame must be at least 1");
  }
  auto reader = EventFileReader::open(cfg.events, SensorSize{cfg.accum.width, cfg.accum.height});
  FrameAccumulator accum(cfg.accum, cfg.t_begin);
  std::vector<EventFrame> frames;
  Event e;
  while (frames.size() <= frame && reader->next(e)) {
    accum.push(e, frames);
  }
  if (frames.size() <= frame) {
    accum.finish(frames, cfg.t_end);
  }
  if (frames.size() <= frame) {
    throw Error(ErrorKind::config, fmt::format("stream has only {} frames", frames.size()));
  }
  const auto prev = to_intensity(frames[frame - 1], cfg.accum.count_cap);
  const auto next = to_intensity(frames[frame], cfg.accum.count_cap);
  const auto field = compute_flow(prev, next, cfg.flow, cfg.window_seconds());
  ensure_dir(out_dir);
  {
    auto out = open_out(out_dir / "flow.csv");
    write_flow_csv(out, field);
  }
  auto out = open_out(out_dir / "flow.svg");
  write_flow_svg(out, field, prev, stride > 0 ? stride : cfg.flow_stride);
  fmt::print("frame {}: {} valid flow vectors\n", frame, field.valid_count());
  return ok;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Planar vehicle velocity from a downward-facing event camera"};
  app.require_subcommand(1);

  fs::path scenario, sim_out;
  auto * simulate = app.add_subcommand("simulate", "Render a synthetic scenario to events and ground truth");
  simulate->add_option("scenario", scenario, "Scenario config")->required();
  simulate->add_option("-o,--out", sim_out, "Output directory");

  fs::path run_cfg;
  std::optional<fs::path> est_out;
  std::optional<int> workers;
  auto * estimate = app.add_subcommand("estimate", "Run the velocity pipeline over an event file");
  estimate->add_option("config", run_cfg, "Run config")->required();
  estimate->add_option("-o,--out", est_out, "Output directory (default paths.output_dir)");
  estimate->add_option("-j,--workers", workers, "Worker threads");

  EvalArgs eval;
  auto * evaluate_cmd = app.add_subcommand("evaluate", "Compare estimates with ground truth");
  fs::path plot_out;
  auto * plot = app.add_subcommand("plot", "Write time-series and residual SVGs");
  for (auto * sub : {evaluate_cmd, plot}) {
    sub->add_option("estimates", eval.estimates, "velocity.csv")->required();
    sub->add_option("truth", eval.truth, "Ground-truth CSV")->required();
    sub->add_option("-c,--config", eval.config, "Run config supplying the tolerance");
    sub->add_option("-t,--tolerance", eval.tolerance, "Pairing tolerance in seconds");
  }
  evaluate_cmd->add_option("--latency", eval.latency, "latency.csv from estimate");
  evaluate_cmd->add_option("--json", eval.json, "Also write the report as JSON");
  plot->add_option("-o,--out", plot_out, "Output directory")->required();

  fs::path blur_cfg, blur_out;
  int blur_width = 640;
  double blur_fov = 60.0, blur_z = 0.6;
  std::vector<double> speeds = {1, 2, 5, 10, 15, 20, 25, 30, 35, 40};
  std::vector<double> budgets = {0.01, 0.02, 0.05};
  auto * blur = app.add_subcommand("blur-budget", "Tabulate the longest exposure per blur budget");
  blur->add_option("-c,--config", blur_cfg, "Run config supplying the camera");
  blur->add_option("--width", blur_width, "Sensor width in pixels")->capture_default_str();
  blur->add_option("--fov-deg", blur_fov, "Horizontal field of view")->capture_default_str();
  blur->add_option("--height", blur_z, "Camera height above ground in metres")->capture_default_str();
  blur->add_option("--speeds", speeds, "Speeds in m/s")->delimiter(',')->capture_default_str();
  blur->add_option("--budgets", budgets, "Blur budgets as fractions")->delimiter(',')->capture_default_str();
  blur->add_option("-o,--out", blur_out, "Write blur_budget.csv and .svg here instead of stdout");

  fs::path flow_cfg, flow_out;
  std::size_t flow_frame = 1;
  int flow_stride = 0;
  auto * flow = app.add_subcommand("flow-debug", "Dump the flow field between two frames");
  flow->add_option("config", flow_cfg, "Run config")->required();
  flow->add_option("-f,--frame", flow_frame, "Index of the later frame")->capture_default_str();
  flow->add_option("--stride", flow_stride, "Arrow spacing (default flow.stride)");
  flow->add_option("-o,--out", flow_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*simulate) {
      return cmd_simulate(scenario, sim_out);
    }
    if (*estimate) {
      return cmd_estimate(run_cfg, est_out, workers);
    }
    if (*evaluate_cmd) {
      return cmd_evaluate(eval);
    }
    if (*plot) {
      return cmd_plot(eval, plot_out);
    }
    if (*blur) {
      return cmd_blur_budget(blur_cfg, blur_width, blur_fov, blur_z, speeds, budgets, blur_out);
    }
    if (*flow) {
      return cmd_flow_debug(flow_cfg, flow_frame, flow_stride, flow_out);
    }
  } catch (const Error & e) {
    fmt::print(stderr, "error ({}): {}\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception & e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return failure;
  }
  return failure;
}
