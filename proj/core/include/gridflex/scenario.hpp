#pragma once

#include <map>
#include <string>

#include "gridflex/engine.hpp"
#include "gridflex/envelope.hpp"
#include "gridflex/planner.hpp"
#include "gridflex/response.hpp"
#include "gridflex/types.hpp"

namespace gridflex {

/// Everything one curtailment experiment needs, assembled from a scenario
/// JSON file (pieces may live inline or in referenced files).
struct Scenario {
  std::string name;
  ClusterSpec cluster;
  Ensemble ensemble;
  CurveLibrary curves;
  ScalingModel scaling;
  EventSpec event;  // baseline already resolved ("auto" -> predicted full power)
  Policy policy;
  PlannerConfig planner;
  SimConfig sim;
  /// Seconds of steady pre-event operation simulated before the first ramp.
  double lead_in_s = 0.0;
};

// Piece parsers; each throws ParseError / ValidationError subclasses.
ClusterSpec parse_cluster_json(const std::string& text);
Ensemble parse_ensemble_json(const std::string& text, const ClusterSpec& cluster,
                             const CurveLibrary& curves);

/// Parses a scenario document. Relative paths inside it resolve against
/// base_dir.
Scenario parse_scenario_json(const std::string& text, const std::string& base_dir);

/// parse_scenario_json over a file (base_dir = the file's directory).
Scenario load_scenario(const std::string& path);

struct ScenarioResult {
  std::string name;
  std::string policy_name;
  double baseline_watts = 0.0;
  ControlPlan plan;
  TelemetryTrace trace;  // empty when the plan is infeasible
  ComplianceResult compliance;
  SnapbackResult snapback;
  std::map<std::string, QosRow> qos;
  std::map<std::string, SlaResult> predicted_sla;
  double rmse_pct = 0.0;
  /// feasible && compliant && no snap-back && every job inside its budget.
  bool pass = false;
};

/// Plan, simulate, and grade one scenario end to end.
ScenarioResult run_scenario(const Scenario& sc);

/// Deterministic JSON payloads.
std::string report_json(const ScenarioResult& r);
std::string plan_json(const ControlPlan& plan);

/// Writes report.json, plan.json and, when a trace exists, trace.csv and
/// plot.csv into out_dir (created if missing).
void write_outputs(const std::string& out_dir, const ScenarioResult& r);

}  // namespace gridflex
