#ifndef GROUNDFLOW_PLOTS_HPP
#define GROUNDFLOW_PLOTS_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "groundflow/camera.hpp"
#include "groundflow/vehicle_state.hpp"

namespace groundflow
{
/// Writes one time series and one residual histogram per channel:
/// {v_lon,v_lat,omega}_timeseries.svg and {v_lon,v_lat,omega}_residuals.svg.
/// Returns the written paths in that order.
std::vector<std::filesystem::path> emit_plots(
  std::span<const VelocityEstimate> estimates, std::span<const VelocityEstimate> truth,
  double tolerance, const std::filesystem::path & out_dir);

struct BlurBudgetRow
{
  double speed = 0.0;   // m/s
  double budget = 0.0;  // fraction
  double max_exposure = 0.0;  // seconds; infinity when unbounded
};

std::vector<BlurBudgetRow> blur_budget_table(
  std::span<const double> speeds, std::span<const double> budgets, const CameraModel & cam);

void write_blur_budget_csv(std::ostream & out, std::span<const BlurBudgetRow> rows);
void write_blur_budget_svg(std::ostream & out, std::span<const BlurBudgetRow> rows);

}  // namespace groundflow

#endif  // GROUNDFLOW_PLOTS_HPP
