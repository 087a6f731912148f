#pragma once

#include <set>
#include <string>
#include <variant>
#include <vector>

namespace gridflex {

// ---------------------------------------------------------------------------
// Flexibility tiers
// ---------------------------------------------------------------------------

// Flex0 jobs are strict: they must never receive a control action.
// Higher tiers tolerate a bounded reduction of *average* throughput
// over an SLA window.
enum class FlexLevel : int { Flex0 = 0, Flex1 = 1, Flex2 = 2, Flex3 = 3 };

/// Contractual throughput tolerance for one job.
struct FlexTier {
  FlexLevel level = FlexLevel::Flex0;
  /// Maximum tolerated reduction of average normalized throughput, in [0,1].
  double max_avg_throughput_reduction = 0.0;
  /// Window over which the average is taken; 0 means "full experiment".
  double sla_window_s = 0.0;
};

/// Canonical budget for a tier: 0.00 / 0.10 / 0.25 / 0.50.
double budget_for(FlexLevel level);

FlexTier make_tier(FlexLevel level, double sla_window_s = 0.0);

/// Maps 0..3 to the tier enum; throws InvalidParamsError otherwise.
FlexLevel flex_level_from_int(int level);

// ---------------------------------------------------------------------------
// Jobs and cluster
// ---------------------------------------------------------------------------

enum class JobKind { PreTraining, FineTuning, Inference };

std::string job_kind_name(JobKind kind);
JobKind job_kind_from_name(const std::string& name);

struct JobSpec {
  std::string id;
  JobKind kind = JobKind::PreTraining;
  std::string model_label;  // informational, e.g. "mpt-13b"
  int nodes = 1;            // whole nodes allocated at submission
  FlexTier flex;
  std::string curve_class;  // key into the response-curve library
  /// Work units per second when running uncapped at full allocation.
  double baseline_throughput = 1.0;
  /// Fraction of the active power cap the job actually draws (1.0 = at cap).
  double utilization = 1.0;
};

double flex_budget(const JobSpec& job);

struct ClusterSpec {
  int total_nodes = 32;
  int gpus_per_node = 8;
  double gpu_tdp_watts = 400.0;
  double gpu_min_cap_watts = 150.0;
  double gpu_idle_watts = 90.0;
  /// Non-GPU draw charged per occupied node.
  double node_overhead_watts = 0.0;

  int total_gpus() const { return total_nodes * gpus_per_node; }
  /// Lowest legal per-GPU cap as a fraction of TDP.
  double min_power_fraction() const { return gpu_min_cap_watts / gpu_tdp_watts; }
  void validate() const;  // throws ValidationError
};

// ---------------------------------------------------------------------------
// Control actions
// ---------------------------------------------------------------------------

struct SetCap {
  double watts_per_gpu = 0.0;  // must lie in [gpu_min_cap, gpu_tdp]
};
struct Pause {};
struct Resume {};
struct Resize {
  int new_nodes = 0;  // scale-down only: 1 <= new_nodes <= spec.nodes
};
struct ClearCap {};

using ActionKind = std::variant<SetCap, Pause, Resume, Resize, ClearCap>;

struct ControlAction {
  std::string job_id;
  ActionKind action;
};

std::string action_name(const ActionKind& action);

/// Validates one action against its target job; throws ValidationError.
/// Flex0 jobs reject every action.
void validate_action(const ControlAction& action, const JobSpec& job,
                     const ClusterSpec& cluster);

// ---------------------------------------------------------------------------
// Curtailment events
// ---------------------------------------------------------------------------

/// One step of a (possibly multi-step) curtailment. Reductions are
/// cumulative fractions of the baseline, so a 15% step followed by a
/// 25% step deepens the curtailment by another 10 points.
struct EventStep {
  double target_reduction_fraction = 0.0;
  double ramp_s = 0.0;  // ramp into this step's hold level
  double hold_s = 0.0;
};

struct EventSpec {
  double baseline_watts = 0.0;
  std::vector<EventStep> steps;
  double recovery_ramp_s = 0.0;
  double snapback_window_s = 0.0;
  /// Post-event ceiling; 0 means "equal to baseline". Never above baseline.
  double snapback_limit_watts = 0.0;

  void validate() const;  // throws EmptyEventError / InvalidParamsError
  double resolved_snapback_limit() const;
  /// ramps + holds + recovery + snapback window.
  double span_s() const;
  double deepest_reduction() const;
};

// ---------------------------------------------------------------------------
// Job runtime state
// ---------------------------------------------------------------------------

enum class JobStatus { Running, Paused };

struct JobState {
  JobSpec spec;
  JobStatus status = JobStatus::Running;
  double cap_watts = 0.0;  // per GPU; equals TDP when uncapped
  int nodes = 0;           // current allocation
  double cumulative_work = 0.0;
};

JobState initial_state(const JobSpec& spec, const ClusterSpec& cluster);

/// Applies one action in place; throws ValidationError on an illegal one.
void apply_action(JobState& state, const ActionKind& action,
                  const ClusterSpec& cluster);

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct Ensemble {
  std::string name;
  std::vector<JobSpec> jobs;

  int node_sum() const;
  const JobSpec* find(const std::string& id) const;
};

/// Checks ids, node totals, tiers and curve references. The set of known
/// curve classes comes from whatever library the caller will run with.
/// Throws OverAllocatedError / DuplicateIdError / UnknownCurveClassError /
/// ValidationError. An empty job list is a valid (degenerate) ensemble.
Ensemble validate_ensemble(std::string name, std::vector<JobSpec> jobs,
                           const ClusterSpec& cluster,
                           const std::set<std::string>& known_curve_classes);

}  // namespace gridflex
