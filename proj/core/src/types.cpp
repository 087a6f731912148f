#include "gridflex/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gridflex/errors.hpp"

namespace gridflex {

double budget_for(FlexLevel level) {
  switch (level) {
    case FlexLevel::Flex0: return 0.00;
    case FlexLevel::Flex1: return 0.10;
    case FlexLevel::Flex2: return 0.25;
    case FlexLevel::Flex3: return 0.50;
  }
  throw InvalidParamsError("unknown flex level");
}

FlexTier make_tier(FlexLevel level, double sla_window_s) {
  return FlexTier{level, budget_for(level), sla_window_s};
}

FlexLevel flex_level_from_int(int level) {
  if (level < 0 || level > 3)
    throw InvalidParamsError("flex level must be 0..3, got " + std::to_string(level));
  return static_cast<FlexLevel>(level);
}

std::string job_kind_name(JobKind kind) {
  switch (kind) {
    case JobKind::PreTraining: return "pretraining";
    case JobKind::FineTuning: return "finetuning";
    case JobKind::Inference: return "inference";
  }
  return "unknown";
}

JobKind job_kind_from_name(const std::string& name) {
  if (name == "pretraining") return JobKind::PreTraining;
  if (name == "finetuning") return JobKind::FineTuning;
  if (name == "inference") return JobKind::Inference;
  throw InvalidParamsError("unknown job kind '" + name + "'");
}

double flex_budget(const JobSpec& job) {
  return job.flex.max_avg_throughput_reduction;
}

void ClusterSpec::validate() const {
  if (total_nodes <= 0 || gpus_per_node <= 0)
    throw ValidationError("cluster node/gpu counts must be positive");
  if (gpu_tdp_watts <= 0.0)
    throw ValidationError("gpu_tdp_watts must be positive");
  if (gpu_min_cap_watts <= 0.0 || gpu_min_cap_watts > gpu_tdp_watts)
    throw ValidationError("gpu_min_cap_watts must lie in (0, TDP]");
  if (gpu_idle_watts < 0.0 || gpu_idle_watts > gpu_tdp_watts)
    throw ValidationError("gpu_idle_watts must lie in [0, TDP]");
  if (node_overhead_watts < 0.0)
    throw ValidationError("node_overhead_watts must be non-negative");
}

std::string action_name(const ActionKind& action) {
  struct Visitor {
    std::string operator()(const SetCap&) const { return "set_cap"; }
    std::string operator()(const Pause&) const { return "pause"; }
    std::string operator()(const Resume&) const { return "resume"; }
    std::string operator()(const Resize&) const { return "resize"; }
    std::string operator()(const ClearCap&) const { return "clear_cap"; }
  };
  return std::visit(Visitor{}, action);
}

void validate_action(const ControlAction& action, const JobSpec& job,
                     const ClusterSpec& cluster) {
  if (job.flex.level == FlexLevel::Flex0)
    throw ValidationError("job '" + job.id + "' is Flex0 and accepts no control actions");
  if (const auto* cap = std::get_if<SetCap>(&action.action)) {
    if (cap->watts_per_gpu < cluster.gpu_min_cap_watts - 1e-9 ||
        cap->watts_per_gpu > cluster.gpu_tdp_watts + 1e-9)
      throw ValidationError("cap outside [gpu_min_cap, TDP] for job '" + job.id + "'");
  } else if (const auto* rs = std::get_if<Resize>(&action.action)) {
    if (rs->new_nodes < 1 || rs->new_nodes > job.nodes)
      throw ValidationError("resize must keep 1..original nodes for job '" + job.id + "'");
  }
}

void EventSpec::validate() const {
  if (steps.empty()) throw EmptyEventError("event has no steps");
  if (baseline_watts <= 0.0)
    throw InvalidParamsError("event baseline_watts must be positive");
  double prev = 0.0;
  for (const auto& s : steps) {
    if (s.target_reduction_fraction < 0.0 || s.target_reduction_fraction > 1.0)
      throw InvalidParamsError("step reduction must lie in [0,1]");
    if (s.target_reduction_fraction + 1e-12 < prev)
      throw InvalidParamsError("step reductions must be cumulative-monotone");
    if (s.ramp_s < 0.0 || s.hold_s < 0.0)
      throw InvalidParamsError("step durations must be non-negative");
    prev = s.target_reduction_fraction;
  }
  if (recovery_ramp_s < 0.0 || snapback_window_s < 0.0)
    throw InvalidParamsError("recovery/snapback durations must be non-negative");
  if (snapback_limit_watts < 0.0 || snapback_limit_watts > baseline_watts + 1e-9)
    throw InvalidParamsError("snapback limit must lie in [0, baseline]");
}

double EventSpec::resolved_snapback_limit() const {
  return snapback_limit_watts > 0.0 ? snapback_limit_watts : baseline_watts;
}

double EventSpec::span_s() const {
  double total = recovery_ramp_s + snapback_window_s;
  for (const auto& s : steps) total += s.ramp_s + s.hold_s;
  return total;
}

double EventSpec::deepest_reduction() const {
  double deepest = 0.0;
  for (const auto& s : steps)
    deepest = std::max(deepest, s.target_reduction_fraction);
  return deepest;
}

JobState initial_state(const JobSpec& spec, const ClusterSpec& cluster) {
  JobState st;
  st.spec = spec;
  st.status = JobStatus::Running;
  st.cap_watts = cluster.gpu_tdp_watts;
  st.nodes = spec.nodes;
  st.cumulative_work = 0.0;
  return st;
}

void apply_action(JobState& state, const ActionKind& action,
                  const ClusterSpec& cluster) {
  validate_action(ControlAction{state.spec.id, action}, state.spec, cluster);
  if (const auto* cap = std::get_if<SetCap>(&action)) {
    state.cap_watts = std::min(cap->watts_per_gpu, cluster.gpu_tdp_watts);
  } else if (std::holds_alternative<Pause>(action)) {
    state.status = JobStatus::Paused;
  } else if (std::holds_alternative<Resume>(action)) {
    state.status = JobStatus::Running;
  } else if (const auto* rs = std::get_if<Resize>(&action)) {
    state.nodes = rs->new_nodes;
  } else if (std::holds_alternative<ClearCap>(action)) {
    state.cap_watts = cluster.gpu_tdp_watts;
  }
}

int Ensemble::node_sum() const {
  int sum = 0;
  for (const auto& j : jobs) sum += j.nodes;
  return sum;
}

const JobSpec* Ensemble::find(const std::string& id) const {
  for (const auto& j : jobs)
    if (j.id == id) return &j;
  return nullptr;
}

Ensemble validate_ensemble(std::string name, std::vector<JobSpec> jobs,
                           const ClusterSpec& cluster,
                           const std::set<std::string>& known_curve_classes) {
  cluster.validate();
  std::set<std::string> seen;
  int nodes = 0;
  for (const auto& job : jobs) {
    if (job.id.empty() || job.id.find_first_of(",\n\r") != std::string::npos)
      throw ValidationError("job ids must be non-empty and CSV-safe");
    if (!seen.insert(job.id).second)
      throw DuplicateIdError("duplicate job id '" + job.id + "'");
    if (job.nodes <= 0)
      throw ValidationError("job '" + job.id + "' must request at least one node");
    if (job.baseline_throughput <= 0.0)
      throw ValidationError("job '" + job.id + "' baseline throughput must be positive");
    if (job.utilization <= 0.0 || job.utilization > 1.0)
      throw ValidationError("job '" + job.id + "' utilization must lie in (0,1]");
    if (!known_curve_classes.count(job.curve_class))
      throw UnknownCurveClassError("job '" + job.id + "' references unknown curve class '" +
                                   job.curve_class + "'");
    const double budget = budget_for(job.flex.level);
    if (std::abs(job.flex.max_avg_throughput_reduction - budget) > 1e-9)
      throw ValidationError("job '" + job.id + "' tier budget does not match its level");
    nodes += job.nodes;
  }
  if (nodes > cluster.total_nodes)
    throw OverAllocatedError("ensemble requests " + std::to_string(nodes) + " nodes on a " +
                             std::to_string(cluster.total_nodes) + "-node cluster");
  Ensemble e;
  e.name = std::move(name);
  e.jobs = std::move(jobs);
  return e;
}

}  // namespace gridflex
