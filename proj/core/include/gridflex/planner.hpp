#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridflex/envelope.hpp"
#include "gridflex/response.hpp"
#include "gridflex/types.hpp"

namespace gridflex {

enum class Knob { Cap, Pause, Resize };
enum class Strategy { Greedy, Fair };

/// Which knobs a policy may touch and how it spreads the burden.
struct Policy {
  std::set<Knob> knobs;
  Strategy strategy = Strategy::Fair;

  bool has(Knob k) const { return knobs.count(k) > 0; }
  std::string name() const;

  /// Parses "cap+pause/fair", "pause/greedy", ... ("dvfs" is accepted as an
  /// alias for "cap"). Throws InvalidParamsError.
  static Policy parse(const std::string& text);

  /// The four preset policies, in display order: cap+pause/fair, cap/fair,
  /// pause/greedy, pause+resize/fair.
  static const std::vector<Policy>& presets();
};

struct PlannerConfig {
  /// Compliance tolerance as a fraction of the event baseline.
  double tolerance_fraction = 0.01;
  /// SLA window; 0 means the envelope span. May exceed the simulated span,
  /// in which case the un-simulated remainder counts as full throughput.
  double sla_window_s = 0.0;
  double bisection_lambda_tol = 1e-6;
  int bisection_max_iters = 60;
};

/// Open-loop control schedule plus the prediction it was built from.
struct ControlPlan {
  double interval_s = 0.0;
  double baseline_watts = 0.0;
  double sla_window_s = 0.0;

  /// Actions to apply at the start of each interval.
  std::vector<std::vector<ControlAction>> schedule;
  std::vector<double> predicted_watts;
  std::vector<double> target_watts;

  /// Per-job predicted normalized throughput, parallel to job_ids.
  std::vector<std::string> job_ids;
  std::vector<std::vector<double>> predicted_throughput;

  /// Worst-window average predicted throughput per job.
  std::map<std::string, double> predicted_sla;

  bool feasible = true;
  double requested_watts = 0.0;       // set when infeasible
  double max_achievable_watts = 0.0;  // best reduction at the failing interval
  int first_infeasible_interval = -1;

  std::set<std::string> impacted_jobs() const;
  int jobs_impacted() const { return static_cast<int>(impacted_jobs().size()); }
};

/// Plans control actions tracking the envelope from below: for every ramp
/// and hold interval the predicted cluster power stays at or under the
/// target (plus tolerance), no Flex0 job is ever touched, and every job's
/// predicted average throughput stays inside its flex budget. Infeasible
/// requests come back with feasible=false and the best achievable reduction.
ControlPlan plan(const Ensemble& ensemble, const ClusterSpec& cluster,
                 const CurveLibrary& curves, const ScalingModel& scaling,
                 const PowerEnvelope& envelope, const Policy& policy,
                 const PlannerConfig& config = {});

/// One-shot sustained assignment: iterates jobs by (flex tier desc, power
/// desc, id asc) applying the deepest tier-legal action per job until the
/// cumulative predicted reduction covers reduction_watts. Returns the
/// actions; throws InfeasibleError when even acting on every flexible job
/// falls short.
std::vector<ControlAction> greedy_assign(const std::vector<JobState>& states,
                                         const CurveLibrary& curves,
                                         const ScalingModel& scaling,
                                         const ClusterSpec& cluster,
                                         double reduction_watts,
                                         const std::set<Knob>& knobs);

/// One-shot fair assignment: bisects a severity scalar lambda in [0,1] so
/// that per-job slowdowns lambda * flex_budget(j) produce the requested
/// reduction. Slowdowns are realized through the finest available knob
/// (cap inversion, else node-quantized resize rounded toward the smaller
/// slowdown, else pausing). Throws InfeasibleError when lambda=1 falls
/// short; lambda_out reports the converged scalar.
std::vector<ControlAction> fair_assign(const std::vector<JobState>& states,
                                       const CurveLibrary& curves,
                                       const ScalingModel& scaling,
                                       const ClusterSpec& cluster,
                                       double reduction_watts,
                                       const std::set<Knob>& knobs,
                                       double* lambda_out = nullptr);

/// Average of `values` over the worst window of `window_s`, with samples
/// spaced interval_s apart. A window longer than the series treats the
/// missing remainder as 1.0 (full speed outside the experiment).
double worst_window_average(const std::vector<double>& values, double interval_s,
                            double window_s);

struct SlaResult {
  double min_window_avg = 1.0;
  double budget = 0.0;
  bool pass = true;
};

/// Evaluates the plan's predicted throughput against each job's budget.
std::map<std::string, SlaResult> sla_check(const ControlPlan& plan,
                                           const Ensemble& ensemble);

}  // namespace gridflex
