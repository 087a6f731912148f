#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridflex/envelope.hpp"
#include "gridflex/planner.hpp"
#include "gridflex/response.hpp"
#include "gridflex/types.hpp"

namespace gridflex {

struct SimConfig {
  double interval_s = 60.0;
  /// Relative std-dev of the power meter; measured = true * (1 + noise * z).
  double noise_std_fraction = 0.02;
  std::uint64_t rng_seed = 12345;
  /// Meter block length; compliance averages measured power over blocks of
  /// this many seconds before comparing against the target.
  double averaging_window_s = 300.0;
  /// Systematic plant/model gap; true = predicted * (1 + mismatch).
  double model_mismatch_fraction = 0.0;
};

struct JobSample {
  JobStatus status = JobStatus::Running;
  double cap_watts = 0.0;
  int nodes = 0;
  double norm_throughput = 1.0;
  /// Integral of normalized throughput (seconds of full-speed work done).
  double cumulative_work_s = 0.0;
};

struct TraceRow {
  double t_s = 0.0;
  PhaseKind phase = PhaseKind::Pre;
  int step_index = -1;
  double target_watts = 0.0;
  double predicted_watts = 0.0;
  double true_watts = 0.0;
  double measured_watts = 0.0;
  std::vector<JobSample> jobs;  // parallel to TelemetryTrace::job_ids
};

struct TelemetryTrace {
  double interval_s = 0.0;
  double baseline_watts = 0.0;
  std::vector<std::string> job_ids;
  std::vector<TraceRow> rows;
};

/// Replays the plan open-loop: applies each interval's actions, evaluates
/// the power model, and overlays meter noise and any systematic model
/// mismatch. Deterministic for a fixed seed.
TelemetryTrace run(const ControlPlan& plan, const Ensemble& ensemble,
                   const ClusterSpec& cluster, const CurveLibrary& curves,
                   const ScalingModel& scaling, const PowerEnvelope& envelope,
                   const SimConfig& sim = {});

struct StepCompliance {
  int step_index = 0;
  double target_watts = 0.0;
  double mean_measured_watts = 0.0;
  /// 1 - mean_measured / baseline over the hold.
  double achieved_reduction_fraction = 0.0;
  double worst_block_watts = 0.0;
  /// target + tolerance - worst block mean; negative means violation.
  double margin_watts = 0.0;
  bool pass = true;
};

struct ComplianceResult {
  double tolerance_watts = 0.0;
  std::vector<StepCompliance> steps;
  bool pass = true;
};

/// Verifies every hold: block-averaged measured power (blocks of
/// averaging_window_s) must stay at or under the step target plus
/// tolerance_fraction of the baseline.
ComplianceResult compliance(const TelemetryTrace& trace, const PowerEnvelope& envelope,
                            double tolerance_fraction, double averaging_window_s);

struct SnapbackResult {
  double limit_watts = 0.0;
  double worst_block_watts = 0.0;
  double margin_watts = 0.0;
  bool pass = true;
};

/// Verifies recovery: block-averaged measured power after the ramp-up must
/// not exceed the baseline plus tolerance (no rebound spike).
SnapbackResult snapback_check(const TelemetryTrace& trace, const PowerEnvelope& envelope,
                              double tolerance_fraction, double averaging_window_s);

struct QosRow {
  double min_window_avg = 1.0;
  double budget = 0.0;
  bool pass = true;
  /// Work completed during the trace relative to running free throughout.
  double work_fraction = 1.0;
};

/// Realized per-job throughput against each job's flex budget, using the
/// same worst-window rule as the planner's prediction.
std::map<std::string, QosRow> qos_report(const TelemetryTrace& trace,
                                         const Ensemble& ensemble, double window_s);

/// Prediction error: 100 * sqrt(mean((predicted-measured)^2)) / mean(measured).
double rmse_percent(const TelemetryTrace& trace);

/// Wide CSV: one row per interval, power columns then per-job columns.
void write_trace_csv(const std::string& path, const TelemetryTrace& trace);

/// Long CSV (time_s,series,value) convenient for plotting tools.
void write_plot_csv(const std::string& path, const TelemetryTrace& trace);

}  // namespace gridflex
