#include "gridflex/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "gridflex/errors.hpp"

namespace gridflex {

namespace {

const char* status_label(JobStatus s) {
  return s == JobStatus::Paused ? "paused" : "running";
}

size_t block_len(double block_s, double interval_s) {
  if (block_s <= 0.0 || interval_s <= 0.0)
    throw InvalidParamsError("averaging window and interval must be positive");
  return std::max<size_t>(1, static_cast<size_t>(std::llround(block_s / interval_s)));
}

// Means of consecutive blocks (final partial block included).
std::vector<double> block_means(const std::vector<double>& v, size_t m) {
  std::vector<double> out;
  for (size_t i = 0; i < v.size(); i += m) {
    const size_t end = std::min(v.size(), i + m);
    double sum = 0.0;
    for (size_t k = i; k < end; ++k) sum += v[k];
    out.push_back(sum / static_cast<double>(end - i));
  }
  return out;
}

void open_or_throw(std::ofstream& f, const std::string& path) {
  f.open(path);
  if (!f) throw Error("cannot write file: " + path);
}

}  // namespace

TelemetryTrace run(const ControlPlan& plan, const Ensemble& ensemble,
                   const ClusterSpec& cluster, const CurveLibrary& curves,
                   const ScalingModel& scaling, const PowerEnvelope& envelope,
                   const SimConfig& sim) {
  if (sim.interval_s <= 0.0) throw InvalidParamsError("interval_s must be positive");
  if (sim.noise_std_fraction < 0.0)
    throw InvalidParamsError("noise_std_fraction must be non-negative");

  std::vector<JobState> states;
  states.reserve(ensemble.jobs.size());
  std::map<std::string, size_t> index;
  for (const auto& spec : ensemble.jobs) {
    index[spec.id] = states.size();
    states.push_back(initial_state(spec, cluster));
  }

  const int n = std::min<int>(static_cast<int>(plan.schedule.size()),
                              envelope.num_intervals());
  if (n <= 0) throw EmptyTraceError("plan has no intervals to simulate");

  std::mt19937_64 rng(sim.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  TelemetryTrace trace;
  trace.interval_s = sim.interval_s;
  trace.baseline_watts = envelope.baseline_watts();
  trace.job_ids = plan.job_ids.empty() ? [&] {
    std::vector<std::string> ids;
    for (const auto& spec : ensemble.jobs) ids.push_back(spec.id);
    return ids;
  }()
                                       : plan.job_ids;
  trace.rows.reserve(n);

  std::vector<double> work(states.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (const auto& action : plan.schedule[i]) {
      auto it = index.find(action.job_id);
      if (it == index.end())
        throw ActionOnUnknownJobError("plan action targets unknown job '" +
                                      action.job_id + "'");
      apply_action(states[it->second], action.action, cluster);
    }

    const PowerPrediction pred = predict_cluster(states, curves, scaling, cluster);
    const double true_w = pred.cluster_watts * (1.0 + sim.model_mismatch_fraction);
    const double z = gauss(rng);
    const double measured_w =
        std::max(0.0, true_w * (1.0 + sim.noise_std_fraction * z));

    TraceRow row;
    row.t_s = static_cast<double>(i) * sim.interval_s;
    const PhaseSpan span = envelope.phase_of_interval(i);
    row.phase = span.kind;
    row.step_index = span.step_index;
    row.target_watts = envelope.sample(i);
    row.predicted_watts = pred.cluster_watts;
    row.true_watts = true_w;
    row.measured_watts = measured_w;
    row.jobs.resize(states.size());
    for (size_t j = 0; j < states.size(); ++j) {
      const double thr = pred.per_job_throughput.at(states[j].spec.id);
      work[j] += thr * sim.interval_s;
      row.jobs[j] = JobSample{states[j].status, states[j].cap_watts, states[j].nodes,
                              thr, work[j]};
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

ComplianceResult compliance(const TelemetryTrace& trace, const PowerEnvelope& envelope,
                            double tolerance_fraction, double averaging_window_s) {
  if (trace.rows.empty()) throw EmptyTraceError("compliance needs a non-empty trace");
  const size_t m = block_len(averaging_window_s, trace.interval_s);
  ComplianceResult result;
  result.tolerance_watts = tolerance_fraction * envelope.baseline_watts();

  // One entry per hold step, in step order.
  std::map<int, std::vector<double>> hold_measured;
  std::map<int, double> hold_target;
  for (const auto& row : trace.rows) {
    if (row.phase != PhaseKind::Hold) continue;
    hold_measured[row.step_index].push_back(row.measured_watts);
    hold_target[row.step_index] = row.target_watts;
  }

  for (const auto& [step, values] : hold_measured) {
    StepCompliance sc;
    sc.step_index = step;
    sc.target_watts = hold_target[step];
    double sum = 0.0;
    for (double v : values) sum += v;
    sc.mean_measured_watts = sum / static_cast<double>(values.size());
    sc.achieved_reduction_fraction =
        1.0 - sc.mean_measured_watts / envelope.baseline_watts();
    sc.worst_block_watts = 0.0;
    for (double b : block_means(values, m))
      sc.worst_block_watts = std::max(sc.worst_block_watts, b);
    sc.margin_watts = sc.target_watts + result.tolerance_watts - sc.worst_block_watts;
    sc.pass = sc.margin_watts >= -1e-9 * envelope.baseline_watts();
    result.pass = result.pass && sc.pass;
    result.steps.push_back(sc);
  }
  return result;
}

SnapbackResult snapback_check(const TelemetryTrace& trace, const PowerEnvelope& envelope,
                              double tolerance_fraction, double averaging_window_s) {
  const size_t m = block_len(averaging_window_s, trace.interval_s);
  SnapbackResult result;
  const double tol_w = tolerance_fraction * envelope.baseline_watts();
  result.limit_watts = envelope.baseline_watts() + tol_w;

  std::vector<double> post;
  for (const auto& row : trace.rows)
    if (row.phase == PhaseKind::Post) post.push_back(row.measured_watts);

  result.worst_block_watts = 0.0;
  for (double b : block_means(post, m))
    result.worst_block_watts = std::max(result.worst_block_watts, b);
  result.margin_watts = result.limit_watts - result.worst_block_watts;
  result.pass = result.margin_watts >= -1e-9 * envelope.baseline_watts();
  return result;
}

std::map<std::string, QosRow> qos_report(const TelemetryTrace& trace,
                                         const Ensemble& ensemble, double window_s) {
  if (trace.rows.empty()) throw EmptyTraceError("qos report needs a non-empty trace");
  std::map<std::string, QosRow> out;
  const double span = trace.rows.size() * trace.interval_s;
  for (size_t j = 0; j < trace.job_ids.size(); ++j) {
    const JobSpec* spec = ensemble.find(trace.job_ids[j]);
    if (!spec)
      throw ActionOnUnknownJobError("trace mentions unknown job '" + trace.job_ids[j] +
                                    "'");
    std::vector<double> thr;
    thr.reserve(trace.rows.size());
    for (const auto& row : trace.rows) thr.push_back(row.jobs[j].norm_throughput);
    QosRow q;
    q.min_window_avg = worst_window_average(thr, trace.interval_s, window_s);
    q.budget = flex_budget(*spec);
    q.pass = q.min_window_avg + 1e-9 >= 1.0 - q.budget;
    q.work_fraction = trace.rows.back().jobs[j].cumulative_work_s / span;
    out[trace.job_ids[j]] = q;
  }
  return out;
}

double rmse_percent(const TelemetryTrace& trace) {
  if (trace.rows.empty()) throw EmptyTraceError("rmse needs a non-empty trace");
  double sq = 0.0, mean = 0.0;
  for (const auto& row : trace.rows) {
    const double d = row.predicted_watts - row.measured_watts;
    sq += d * d;
    mean += row.measured_watts;
  }
  const double n = static_cast<double>(trace.rows.size());
  mean /= n;
  if (mean <= 0.0) throw EmptyTraceError("rmse undefined for zero mean measured power");
  return 100.0 * std::sqrt(sq / n) / mean;
}

void write_trace_csv(const std::string& path, const TelemetryTrace& trace) {
  std::ofstream f;
  open_or_throw(f, path);
  f << "t_s,phase,step,target_w,predicted_w,true_w,measured_w";
  for (const auto& id : trace.job_ids)
    f << ',' << id << "_status," << id << "_cap_w," << id << "_nodes," << id
      << "_throughput," << id << "_work_s";
  f << '\n';
  char buf[64];
  auto num = [&](double v, const char* fmt) {
    std::snprintf(buf, sizeof buf, fmt, v);
    return std::string(buf);
  };
  for (const auto& row : trace.rows) {
    f << num(row.t_s, "%.0f") << ',' << phase_name(row.phase) << ',' << row.step_index
      << ',' << num(row.target_watts, "%.3f") << ',' << num(row.predicted_watts, "%.3f")
      << ',' << num(row.true_watts, "%.3f") << ',' << num(row.measured_watts, "%.3f");
    for (const auto& js : row.jobs)
      f << ',' << status_label(js.status) << ',' << num(js.cap_watts, "%.3f") << ','
        << js.nodes << ',' << num(js.norm_throughput, "%.6f") << ','
        << num(js.cumulative_work_s, "%.3f");
    f << '\n';
  }
  if (!f) throw Error("failed while writing: " + path);
}

void write_plot_csv(const std::string& path, const TelemetryTrace& trace) {
  std::ofstream f;
  open_or_throw(f, path);
  f << "t_s,series,value\n";
  char buf[64];
  auto put = [&](double t, const std::string& series, double v, const char* fmt) {
    std::snprintf(buf, sizeof buf, fmt, v);
    f << static_cast<long long>(t) << ',' << series << ',' << buf << '\n';
  };
  for (const auto& row : trace.rows) {
    put(row.t_s, "target_w", row.target_watts, "%.3f");
    put(row.t_s, "predicted_w", row.predicted_watts, "%.3f");
    put(row.t_s, "measured_w", row.measured_watts, "%.3f");
    for (size_t j = 0; j < trace.job_ids.size(); ++j)
      put(row.t_s, "throughput." + trace.job_ids[j], row.jobs[j].norm_throughput,
          "%.6f");
  }
  if (!f) throw Error("failed while writing: " + path);
}

}  // namespace gridflex
