#include "gridflex/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridflex/errors.hpp"
#include "gridflex/loadsignal.hpp"
#include "json.hpp"

namespace gridflex {

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot read file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

json parse_doc(const std::string& text, const std::string& what) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError(what + ": not valid JSON");
  if (!doc.is_object()) throw ParseError(what + ": expected a JSON object");
  return doc;
}

double num_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

int int_or(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw ParseError(std::string("field '") + key + "' must be an integer");
  return j[key].get<int>();
}

std::string str_req(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(what + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

ClusterSpec cluster_from(const json& doc) {
  ClusterSpec c;
  c.total_nodes = int_or(doc, "nodes", c.total_nodes);
  c.gpus_per_node = int_or(doc, "gpus_per_node", c.gpus_per_node);
  c.gpu_tdp_watts = num_or(doc, "gpu_tdp_watts", c.gpu_tdp_watts);
  c.gpu_min_cap_watts = num_or(doc, "gpu_min_cap_watts", c.gpu_min_cap_watts);
  c.gpu_idle_watts = num_or(doc, "gpu_idle_watts", c.gpu_idle_watts);
  c.node_overhead_watts = num_or(doc, "node_overhead_watts", c.node_overhead_watts);
  c.validate();
  return c;
}

Ensemble ensemble_from(const json& doc, const ClusterSpec& cluster,
                       const CurveLibrary& curves) {
  if (!doc.contains("jobs") || !doc["jobs"].is_array())
    throw ParseError("ensemble: missing 'jobs' array");
  std::vector<JobSpec> jobs;
  for (const auto& item : doc["jobs"]) {
    JobSpec job;
    job.id = str_req(item, "id", "job");
    job.kind = job_kind_from_name(str_req(item, "kind", "job '" + job.id + "'"));
    if (item.contains("model_label")) job.model_label = item["model_label"].get<std::string>();
    job.nodes = int_or(item, "nodes", 0);
    job.flex = make_tier(flex_level_from_int(int_or(item, "flex", -1)));
    job.curve_class = str_req(item, "curve_class", "job '" + job.id + "'");
    job.baseline_throughput = num_or(item, "baseline_throughput", 1.0);
    job.utilization = num_or(item, "utilization", 1.0);
    jobs.push_back(std::move(job));
  }
  std::string name = doc.contains("name") ? doc["name"].get<std::string>() : "ensemble";
  return validate_ensemble(std::move(name), std::move(jobs), cluster, curves.class_ids());
}

// {"path": "..."} loads a referenced file; anything else is inline content.
json resolve_piece(const json& node, const std::string& base_dir, std::string* from_path) {
  if (node.is_object() && node.contains("path")) {
    std::filesystem::path p = node["path"].get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    if (from_path) *from_path = p.string();
    return parse_doc(slurp(p.string()), p.string());
  }
  return node;
}

EventSpec event_from(const json& node, double auto_baseline) {
  EventSpec ev;
  double baseline = 0.0;
  if (!node.contains("baseline_watts") ||
      (node["baseline_watts"].is_string() &&
       node["baseline_watts"].get<std::string>() == "auto"))
    baseline = auto_baseline;
  else if (node["baseline_watts"].is_number())
    baseline = node["baseline_watts"].get<double>();
  else
    throw ParseError("event: baseline_watts must be a number or \"auto\"");

  if (node.contains("template")) {
    const std::string tmpl = node["template"].get<std::string>();
    const json params = node.contains("params") ? node["params"] : json::object();
    if (tmpl == "peak_shave") {
      PeakShaveParams p;
      p.reduction_fraction = num_or(params, "reduction_fraction", p.reduction_fraction);
      p.ramp_s = num_or(params, "ramp_s", p.ramp_s);
      p.hold_s = num_or(params, "hold_s", p.hold_s);
      p.recovery_ramp_s = num_or(params, "recovery_ramp_s", p.recovery_ramp_s);
      p.snapback_window_s = num_or(params, "snapback_window_s", p.snapback_window_s);
      ev = make_peak_shave(baseline, p);
    } else if (tmpl == "two_step_emergency") {
      TwoStepParams p;
      p.first_reduction_fraction =
          num_or(params, "first_reduction_fraction", p.first_reduction_fraction);
      p.second_reduction_fraction =
          num_or(params, "second_reduction_fraction", p.second_reduction_fraction);
      p.ramp_s = num_or(params, "ramp_s", p.ramp_s);
      p.hold1_s = num_or(params, "hold1_s", p.hold1_s);
      p.hold2_s = num_or(params, "hold2_s", p.hold2_s);
      p.recovery_ramp_s = num_or(params, "recovery_ramp_s", p.recovery_ramp_s);
      p.snapback_window_s = num_or(params, "snapback_window_s", p.snapback_window_s);
      ev = make_two_step_emergency(baseline, p);
    } else {
      throw ParseError("event: unknown template '" + tmpl + "'");
    }
  } else {
    if (!node.contains("steps") || !node["steps"].is_array() || node["steps"].empty())
      throw EmptyEventError("event: needs a 'template' or a non-empty 'steps' array");
    ev.baseline_watts = baseline;
    for (const auto& s : node["steps"]) {
      EventStep step;
      step.target_reduction_fraction = num_or(s, "reduction_fraction", -1.0);
      step.ramp_s = num_or(s, "ramp_s", 0.0);
      step.hold_s = num_or(s, "hold_s", 0.0);
      ev.steps.push_back(step);
    }
    ev.recovery_ramp_s = num_or(node, "recovery_ramp_s", 900.0);
    ev.snapback_window_s = num_or(node, "snapback_window_s", 3600.0);
  }

  if (node.contains("snapback_limit_fraction"))
    ev.snapback_limit_watts = num_or(node, "snapback_limit_fraction", 1.0) * baseline;
  else if (node.contains("snapback_limit_watts"))
    ev.snapback_limit_watts = num_or(node, "snapback_limit_watts", 0.0);
  ev.validate();
  return ev;
}

json action_to_json(double t_s, const ControlAction& a) {
  json out{{"t_s", t_s}, {"job_id", a.job_id}, {"action", action_name(a.action)}};
  if (const auto* cap = std::get_if<SetCap>(&a.action))
    out["watts_per_gpu"] = cap->watts_per_gpu;
  if (const auto* rz = std::get_if<Resize>(&a.action)) out["new_nodes"] = rz->new_nodes;
  return out;
}

}  // namespace

ClusterSpec parse_cluster_json(const std::string& text) {
  return cluster_from(parse_doc(text, "cluster"));
}

Ensemble parse_ensemble_json(const std::string& text, const ClusterSpec& cluster,
                             const CurveLibrary& curves) {
  return ensemble_from(parse_doc(text, "ensemble"), cluster, curves);
}

Scenario parse_scenario_json(const std::string& text, const std::string& base_dir) {
  const json doc = parse_doc(text, "scenario");
  Scenario sc;
  sc.name = doc.contains("name") ? doc["name"].get<std::string>() : "scenario";

  sc.cluster = doc.contains("cluster")
                   ? cluster_from(resolve_piece(doc["cluster"], base_dir, nullptr))
                   : ClusterSpec{};
  sc.cluster.validate();

  if (doc.contains("curves")) {
    const json cj = resolve_piece(doc["curves"], base_dir, nullptr);
    sc.curves = CurveLibrary::parse_json_text(cj.dump());
  } else {
    sc.curves = CurveLibrary::defaults();
  }

  if (!doc.contains("ensemble")) throw ParseError("scenario: missing 'ensemble'");
  sc.ensemble = ensemble_from(resolve_piece(doc["ensemble"], base_dir, nullptr),
                              sc.cluster, sc.curves);

  if (doc.contains("scaling"))
    sc.scaling.efficiency_exponent =
        num_or(doc["scaling"], "efficiency_exponent", sc.scaling.efficiency_exponent);

  sc.policy = Policy::parse(str_req(doc, "policy", "scenario"));

  if (doc.contains("planner")) {
    const json& p = doc["planner"];
    sc.planner.tolerance_fraction =
        num_or(p, "tolerance_fraction", sc.planner.tolerance_fraction);
    sc.planner.sla_window_s = num_or(p, "sla_window_s", sc.planner.sla_window_s);
    sc.planner.bisection_lambda_tol =
        num_or(p, "bisection_lambda_tol", sc.planner.bisection_lambda_tol);
    sc.planner.bisection_max_iters =
        int_or(p, "bisection_max_iters", sc.planner.bisection_max_iters);
  }

  if (doc.contains("sim")) {
    const json& s = doc["sim"];
    sc.sim.interval_s = num_or(s, "interval_s", sc.sim.interval_s);
    sc.sim.noise_std_fraction = num_or(s, "noise_std_fraction", sc.sim.noise_std_fraction);
    if (s.contains("rng_seed")) sc.sim.rng_seed = s["rng_seed"].get<std::uint64_t>();
    sc.sim.averaging_window_s =
        num_or(s, "averaging_window_s", sc.sim.averaging_window_s);
    sc.sim.model_mismatch_fraction =
        num_or(s, "model_mismatch_fraction", sc.sim.model_mismatch_fraction);
  }

  sc.lead_in_s = num_or(doc, "lead_in_s", 0.0);

  if (!doc.contains("event")) throw ParseError("scenario: missing 'event'");
  std::vector<JobState> states;
  for (const auto& spec : sc.ensemble.jobs)
    states.push_back(initial_state(spec, sc.cluster));
  const double p0 =
      predict_cluster(states, sc.curves, sc.scaling, sc.cluster).cluster_watts;
  sc.event = event_from(doc["event"], p0);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  const std::filesystem::path p(path);
  const std::string base = p.has_parent_path() ? p.parent_path().string() : ".";
  return parse_scenario_json(slurp(path), base);
}

ScenarioResult run_scenario(const Scenario& sc) {
  ScenarioResult r;
  r.name = sc.name;
  r.policy_name = sc.policy.name();
  r.baseline_watts = sc.event.baseline_watts;

  const PowerEnvelope env = build_envelope(sc.event, sc.sim.interval_s, sc.lead_in_s);
  r.plan = plan(sc.ensemble, sc.cluster, sc.curves, sc.scaling, env, sc.policy,
                sc.planner);
  if (!r.plan.feasible) return r;

  r.trace = run(r.plan, sc.ensemble, sc.cluster, sc.curves, sc.scaling, env, sc.sim);
  r.compliance =
      compliance(r.trace, env, sc.planner.tolerance_fraction, sc.sim.averaging_window_s);
  r.snapback = snapback_check(r.trace, env, sc.planner.tolerance_fraction,
                              sc.sim.averaging_window_s);
  const double window =
      sc.planner.sla_window_s > 0.0 ? sc.planner.sla_window_s : env.span_s();
  r.qos = qos_report(r.trace, sc.ensemble, window);
  r.predicted_sla = sla_check(r.plan, sc.ensemble);
  r.rmse_pct = rmse_percent(r.trace);

  bool qos_ok = true;
  for (const auto& [id, q] : r.qos) qos_ok = qos_ok && q.pass;
  r.pass = r.compliance.pass && r.snapback.pass && qos_ok;
  return r;
}

std::string report_json(const ScenarioResult& r) {
  json steps = json::array();
  for (const auto& s : r.compliance.steps)
    steps.push_back({{"step", s.step_index},
                     {"target_watts", s.target_watts},
                     {"mean_measured_watts", s.mean_measured_watts},
                     {"achieved_reduction_fraction", s.achieved_reduction_fraction},
                     {"worst_block_watts", s.worst_block_watts},
                     {"margin_watts", s.margin_watts},
                     {"pass", s.pass}});

  json qos = json::object();
  for (const auto& [id, q] : r.qos)
    qos[id] = {{"min_window_avg", q.min_window_avg},
               {"budget", q.budget},
               {"work_fraction", q.work_fraction},
               {"pass", q.pass}};

  json predicted = json::object();
  for (const auto& [id, s] : r.predicted_sla)
    predicted[id] = {{"min_window_avg", s.min_window_avg},
                     {"budget", s.budget},
                     {"pass", s.pass}};

  json impacted = json::array();
  for (const auto& id : r.plan.impacted_jobs()) impacted.push_back(id);

  json doc{{"scenario", r.name},
           {"policy", r.policy_name},
           {"baseline_watts", r.baseline_watts},
           {"feasible", r.plan.feasible},
           {"pass", r.pass},
           {"jobs_impacted", r.plan.jobs_impacted()},
           {"impacted_jobs", impacted}};
  if (r.plan.feasible) {
    doc["rmse_percent"] = r.rmse_pct;
    doc["compliance"] = {{"tolerance_watts", r.compliance.tolerance_watts},
                         {"pass", r.compliance.pass},
                         {"steps", steps}};
    doc["snapback"] = {{"limit_watts", r.snapback.limit_watts},
                       {"worst_block_watts", r.snapback.worst_block_watts},
                       {"margin_watts", r.snapback.margin_watts},
                       {"pass", r.snapback.pass}};
    doc["qos"] = qos;
    doc["predicted_sla"] = predicted;
  } else {
    doc["infeasible"] = {{"requested_watts", r.plan.requested_watts},
                         {"max_achievable_watts", r.plan.max_achievable_watts},
                         {"first_infeasible_interval", r.plan.first_infeasible_interval}};
  }
  return doc.dump(2) + "\n";
}

std::string plan_json(const ControlPlan& plan) {
  json actions = json::array();
  for (size_t i = 0; i < plan.schedule.size(); ++i)
    for (const auto& a : plan.schedule[i])
      actions.push_back(action_to_json(static_cast<double>(i) * plan.interval_s, a));
  json doc{{"interval_s", plan.interval_s},
           {"baseline_watts", plan.baseline_watts},
           {"sla_window_s", plan.sla_window_s},
           {"feasible", plan.feasible},
           {"num_intervals", plan.schedule.size()},
           {"actions", actions}};
  if (!plan.feasible) {
    doc["requested_watts"] = plan.requested_watts;
    doc["max_achievable_watts"] = plan.max_achievable_watts;
    doc["first_infeasible_interval"] = plan.first_infeasible_interval;
  }
  return doc.dump(2) + "\n";
}

void write_outputs(const std::string& out_dir, const ScenarioResult& r) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  auto write_text = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write file: " + (dir / name).string());
    f << text;
  };
  write_text("report.json", report_json(r));
  write_text("plan.json", plan_json(r.plan));
  if (!r.trace.rows.empty()) {
    write_trace_csv((dir / "trace.csv").string(), r.trace);
    write_plot_csv((dir / "plot.csv").string(), r.trace);
  }
}

}  // namespace gridflex
