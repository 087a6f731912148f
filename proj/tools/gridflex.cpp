// gridflex: plan and simulate GPU-cluster curtailment for grid events.
//
// Exit codes: 0 success, 2 configuration/validation error, 3 infeasible
// request, 4 runtime failure.

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridflex/engine.hpp"
#include "gridflex/envelope.hpp"
#include "gridflex/errors.hpp"
#include "gridflex/loadsignal.hpp"
#include "gridflex/planner.hpp"
#include "gridflex/scenario.hpp"

namespace gf = gridflex;

namespace {

std::string iso_utc(std::int64_t epoch_s) {
  std::time_t t = static_cast<std::time_t>(epoch_s);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_out_dir(const std::string& name) { return "out/" + name; }

void print_plan_summary(const gf::Scenario& sc, const gf::ControlPlan& plan) {
  const double deepest = sc.event.deepest_reduction();
  std::printf("scenario %s (policy %s)\n", sc.name.c_str(), sc.policy.name().c_str());
  std::printf("baseline %.1f W, deepest target %.1f W (-%.1f%%)\n",
              sc.event.baseline_watts, sc.event.baseline_watts * (1.0 - deepest),
              100.0 * deepest);
  size_t actions = 0;
  for (const auto& interval : plan.schedule) actions += interval.size();
  std::printf("plan: %s, %d job(s) impacted, %zu action(s) over %zu interval(s)\n",
              plan.feasible ? "feasible" : "INFEASIBLE", plan.jobs_impacted(), actions,
              plan.schedule.size());
  if (!plan.feasible)
    std::printf("  interval %d requires %.1f W reduction, max achievable %.1f W\n",
                plan.first_infeasible_interval, plan.requested_watts,
                plan.max_achievable_watts);
}

int do_plan(const std::string& scenario_path, std::string out_dir) {
  const gf::Scenario sc = gf::load_scenario(scenario_path);
  const gf::PowerEnvelope env =
      gf::build_envelope(sc.event, sc.sim.interval_s, sc.lead_in_s);
  const gf::ControlPlan plan =
      gf::plan(sc.ensemble, sc.cluster, sc.curves, sc.scaling, env, sc.policy,
               sc.planner);
  print_plan_summary(sc, plan);
  if (plan.feasible) {
    int over = 0;
    double worst = 1.0;
    for (const auto& [id, res] : gf::sla_check(plan, sc.ensemble)) {
      if (!res.pass) ++over;
      worst = std::min(worst, res.min_window_avg);
    }
    std::printf("predicted qos: %zu job(s), %d over budget, worst window avg %.3f\n",
                plan.predicted_sla.size(), over, worst);
  }
  if (out_dir.empty()) out_dir = default_out_dir(sc.name);
  std::filesystem::create_directories(out_dir);
  const auto path = std::filesystem::path(out_dir) / "plan.json";
  std::ofstream f(path);
  if (!f) throw gf::Error("cannot write file: " + path.string());
  f << gf::plan_json(plan);
  std::printf("wrote %s\n", path.string().c_str());
  if (!plan.feasible)
    throw gf::InfeasibleError("the deepest interval cannot be covered",
                              plan.requested_watts, plan.max_achievable_watts);
  return 0;
}

void print_run_summary(const gf::ScenarioResult& r) {
  if (!r.plan.feasible) return;
  std::printf("rmse %.2f%% of mean measured power\n", r.rmse_pct);
  for (const auto& s : r.compliance.steps)
    std::printf("hold %d: target %.1f W, mean measured %.1f W, achieved -%.1f%%, "
                "margin %.1f W -> %s\n",
                s.step_index, s.target_watts, s.mean_measured_watts,
                100.0 * s.achieved_reduction_fraction, s.margin_watts,
                s.pass ? "ok" : "VIOLATION");
  std::printf("recovery: worst block %.1f W vs limit %.1f W -> %s\n",
              r.snapback.worst_block_watts, r.snapback.limit_watts,
              r.snapback.pass ? "ok" : "SNAP-BACK");
  int qos_fail = 0;
  for (const auto& [id, q] : r.qos)
    if (!q.pass) ++qos_fail;
  std::printf("qos: %zu job(s), %d over budget\n", r.qos.size(), qos_fail);
  std::printf("verdict: %s\n", r.pass ? "PASS" : "FAIL");
}

int do_run(const std::string& scenario_path, std::string out_dir,
           long long seed_override) {
  gf::Scenario sc = gf::load_scenario(scenario_path);
  if (seed_override >= 0) sc.sim.rng_seed = static_cast<std::uint64_t>(seed_override);
  const gf::ScenarioResult r = gf::run_scenario(sc);
  std::printf("scenario %s (policy %s)\n", r.name.c_str(), r.policy_name.c_str());
  if (out_dir.empty()) out_dir = default_out_dir(sc.name);
  gf::write_outputs(out_dir, r);
  print_run_summary(r);
  std::printf("wrote %s/{report.json,plan.json%s}\n", out_dir.c_str(),
              r.trace.rows.empty() ? "" : ",trace.csv,plot.csv");
  if (!r.plan.feasible)
    throw gf::InfeasibleError("the deepest interval cannot be covered",
                              r.plan.requested_watts, r.plan.max_achievable_watts);
  return 0;
}

int do_sweep(const std::string& dir, const std::string& out_root,
             long long seed_override) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw gf::ParseError("no .json scenarios in " + dir);

  std::printf("%-32s %-18s %-8s %-9s %-11s %-7s %s\n", "scenario", "policy",
              "avg_thr", "impacted", "compliance", "rmse%", "verdict");
  int rc = 0;
  for (const auto& file : files) {
    try {
      gf::Scenario sc = gf::load_scenario(file.string());
      if (seed_override >= 0)
        sc.sim.rng_seed = static_cast<std::uint64_t>(seed_override);
      const gf::ScenarioResult r = gf::run_scenario(sc);
      gf::write_outputs((std::filesystem::path(out_root) / file.stem()).string(), r);
      if (!r.plan.feasible) {
        std::printf("%-32s %-18s %-8s %-9s %-11s %-7s %s\n", r.name.c_str(),
                    r.policy_name.c_str(), "-", "-", "-", "-", "INFEASIBLE");
        continue;
      }
      double avg_thr = 0.0;
      for (const auto& [id, q] : r.qos) avg_thr += q.work_fraction;
      if (!r.qos.empty()) avg_thr /= static_cast<double>(r.qos.size());
      std::printf("%-32s %-18s %-8.4f %-9d %-11s %-7.2f %s\n", r.name.c_str(),
                  r.policy_name.c_str(), avg_thr, r.plan.jobs_impacted(),
                  r.compliance.pass ? "ok" : "VIOLATION", r.rmse_pct,
                  r.pass ? "pass" : "FAIL");
    } catch (const gf::ValidationError& e) {
      std::printf("%-32s error: %s\n", file.stem().string().c_str(), e.what());
      rc = rc == 0 ? 2 : rc;
    } catch (const std::exception& e) {
      std::printf("%-32s error: %s\n", file.stem().string().c_str(), e.what());
      rc = rc == 0 ? 4 : rc;
    }
  }
  return rc;
}

int do_validate(const std::string& scenario_path, const std::string& cluster_path,
                const std::string& ensemble_path, const std::string& curves_path) {
  if (!scenario_path.empty()) {
    const gf::Scenario sc = gf::load_scenario(scenario_path);
    std::printf("scenario %s: ok (%zu jobs on %d nodes, policy %s)\n", sc.name.c_str(),
                sc.ensemble.jobs.size(), sc.ensemble.node_sum(),
                sc.policy.name().c_str());
    return 0;
  }
  gf::ClusterSpec cluster;  // defaults unless a file is given
  if (!cluster_path.empty()) {
    std::ifstream f(cluster_path);
    if (!f) throw gf::ParseError("cannot read file: " + cluster_path);
    std::ostringstream buf;
    buf << f.rdbuf();
    cluster = gf::parse_cluster_json(buf.str());
    std::printf("cluster %s: ok (%d nodes x %d GPUs, TDP %.0f W)\n",
                cluster_path.c_str(), cluster.total_nodes, cluster.gpus_per_node,
                cluster.gpu_tdp_watts);
  }
  gf::CurveLibrary curves = gf::CurveLibrary::defaults();
  if (!curves_path.empty()) {
    curves = gf::CurveLibrary::load(curves_path);
    std::printf("curves %s: ok (%zu classes)\n", curves_path.c_str(),
                curves.class_ids().size());
  }
  if (!ensemble_path.empty()) {
    std::ifstream f(ensemble_path);
    if (!f) throw gf::ParseError("cannot read file: " + ensemble_path);
    std::ostringstream buf;
    buf << f.rdbuf();
    const gf::Ensemble e = gf::parse_ensemble_json(buf.str(), cluster, curves);
    std::printf("ensemble %s: ok (%zu jobs, %d of %d nodes)\n", e.name.c_str(),
                e.jobs.size(), e.node_sum(), cluster.total_nodes);
  }
  if (scenario_path.empty() && cluster_path.empty() && ensemble_path.empty() &&
      curves_path.empty())
    throw gf::InvalidParamsError("nothing to validate; pass --scenario or pieces");
  return 0;
}

int do_peak(const std::string& load_path, double window_s, double lookback_s) {
  const gf::LoadSeries series = gf::load_load_csv(load_path);
  const gf::PeakWindow w = gf::find_peak_window(series, window_s);
  std::printf("history: %zu samples at %.0f s cadence, %s .. %s\n", series.size(),
              series.cadence_s, iso_utc(series.points.front().t_epoch_s).c_str(),
              iso_utc(series.points.back().t_epoch_s).c_str());
  std::printf("peak %.0f-second window: %s .. %s, mean %.2f MW\n", window_s,
              iso_utc(w.start_epoch_s).c_str(), iso_utc(w.end_epoch_s).c_str(),
              w.mean_mw);
  if (lookback_s > 0.0) {
    const double base = gf::trailing_mean(series, w.start_epoch_s, lookback_s);
    std::printf("trailing %.0f-second mean before the window: %.2f MW\n", lookback_s,
                base);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPU cluster demand response: plan and simulate curtailment events"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  auto* plan_cmd = app.add_subcommand("plan", "build a control plan for a scenario");
  plan_cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  plan_cmd->add_option("--out", out_dir, "output directory (default out/<name>)");

  long long seed_override = -1;
  auto* run_cmd = app.add_subcommand("run", "plan, simulate and grade a scenario");
  run_cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run_cmd->add_option("--out", out_dir, "output directory (default out/<name>)");
  run_cmd->add_option("--seed", seed_override, "override the scenario's RNG seed");

  std::string sweep_dir, sweep_out = "out/sweep";
  auto* sweep_cmd = app.add_subcommand("sweep", "run every scenario in a directory");
  sweep_cmd->add_option("--dir", sweep_dir, "directory of scenario JSON files")
      ->required();
  sweep_cmd->add_option("--out", sweep_out, "output root (default out/sweep)");
  sweep_cmd->add_option("--seed", seed_override,
                        "override every scenario's RNG seed");

  std::string v_scenario, v_cluster, v_ensemble, v_curves;
  auto* val_cmd = app.add_subcommand("validate", "check configuration files");
  val_cmd->add_option("--scenario", v_scenario, "scenario JSON file");
  val_cmd->add_option("--cluster", v_cluster, "cluster JSON file");
  val_cmd->add_option("--ensemble", v_ensemble, "ensemble JSON file");
  val_cmd->add_option("--curves", v_curves, "curve library JSON file");

  std::string load_path;
  double window_s = 10800.0, lookback_s = 0.0;
  auto* peak_cmd =
      app.add_subcommand("peak", "locate the highest-load window in a demand history");
  peak_cmd->add_option("--load", load_path, "CSV of timestamp,mw")->required();
  peak_cmd->add_option("--window-s", window_s, "window length in seconds");
  peak_cmd->add_option("--baseline-lookback-s", lookback_s,
                       "also report the trailing mean before the window");

  int rc = 0;
  plan_cmd->callback([&] { rc = do_plan(scenario_path, out_dir); });
  run_cmd->callback([&] { rc = do_run(scenario_path, out_dir, seed_override); });
  sweep_cmd->callback([&] { rc = do_sweep(sweep_dir, sweep_out, seed_override); });
  val_cmd->callback([&] { rc = do_validate(v_scenario, v_cluster, v_ensemble, v_curves); });
  peak_cmd->callback([&] { rc = do_peak(load_path, window_s, lookback_s); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const gf::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s (requested %.1f W, achievable %.1f W)\n",
                 e.what(), e.requested_watts, e.max_achievable_watts);
    return 3;
  } catch (const gf::ValidationError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return rc;
}
