#ifndef GROUNDFLOW_TOOLS_SCENARIO_HPP
#define GROUNDFLOW_TOOLS_SCENARIO_HPP

#include <filesystem>
#include <string>

#include "groundflow/config.hpp"
#include "groundflow/synth.hpp"

namespace groundflow::tools
{

/// Simulator scenario: the run configuration plus sim.*, texture.* and
/// trajectory.* keys.
struct Scenario
{
  RunConfig run;
  SimConfig sim;
  Trajectory trajectory = Trajectory::constant(1.0, 0.0, 0.0, 0.0);
  bool csv_events = false;
};

Scenario load_scenario(const KeyValueConfig & kv);

}  // namespace groundflow::tools

#endif  // GROUNDFLOW_TOOLS_SCENARIO_HPP
