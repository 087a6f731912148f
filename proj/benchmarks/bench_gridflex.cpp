#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "gridflex/engine.hpp"
#include "gridflex/envelope.hpp"
#include "gridflex/loadsignal.hpp"
#include "gridflex/planner.hpp"
#include "gridflex/response.hpp"
#include "gridflex/types.hpp"

namespace {

using namespace gridflex;

JobSpec job(const std::string& id, JobKind kind, int nodes, int flex,
            const std::string& curve) {
  JobSpec j;
  j.id = id;
  j.kind = kind;
  j.nodes = nodes;
  j.flex = make_tier(flex_level_from_int(flex));
  j.curve_class = curve;
  return j;
}

Ensemble bench_ensemble(const ClusterSpec& cluster, const CurveLibrary& curves) {
  return validate_ensemble(
      "bench",
      {job("pt_a", JobKind::PreTraining, 8, 3, "pretrain"),
       job("pt_b", JobKind::PreTraining, 6, 3, "pretrain"),
       job("ft_a", JobKind::FineTuning, 6, 2, "finetune"),
       job("ft_b", JobKind::FineTuning, 6, 3, "finetune"),
       job("inf_a", JobKind::Inference, 4, 0, "inference"),
       job("inf_b", JobKind::Inference, 2, 0, "inference")},
      cluster, curves.class_ids());
}

struct Fixture {
  ClusterSpec cluster;
  CurveLibrary curves = CurveLibrary::defaults();
  ScalingModel scaling;
  Ensemble ensemble = bench_ensemble(cluster, curves);
  EventSpec event = make_peak_shave(32 * 8 * 400.0);
  PowerEnvelope envelope = build_envelope(event, 60.0);
  PlannerConfig config{0.01, 21600.0};
};

void BM_PlanFair(benchmark::State& state) {
  Fixture fx;
  const Policy policy = Policy::parse("cap+pause/fair");
  for (auto _ : state) {
    auto p = plan(fx.ensemble, fx.cluster, fx.curves, fx.scaling, fx.envelope, policy,
                  fx.config);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_PlanFair);

void BM_PlanGreedy(benchmark::State& state) {
  Fixture fx;
  const Policy policy = Policy::parse("pause/greedy");
  for (auto _ : state) {
    auto p = plan(fx.ensemble, fx.cluster, fx.curves, fx.scaling, fx.envelope, policy,
                  fx.config);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_PlanGreedy);

void BM_Simulate(benchmark::State& state) {
  Fixture fx;
  const Policy policy = Policy::parse("cap+pause/fair");
  const ControlPlan p =
      plan(fx.ensemble, fx.cluster, fx.curves, fx.scaling, fx.envelope, policy,
           fx.config);
  SimConfig sim;
  sim.noise_std_fraction = 0.005;
  for (auto _ : state) {
    auto trace = run(p, fx.ensemble, fx.cluster, fx.curves, fx.scaling, fx.envelope, sim);
    benchmark::DoNotOptimize(trace);
  }
}
BENCHMARK(BM_Simulate);

void BM_FitCurve(benchmark::State& state) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<CurveSample> samples;
  const CurveLibrary lib = CurveLibrary::defaults();
  const ResponseCurve& truth = lib.at("pretrain");
  for (int i = 0; i < 1000; ++i) {
    const double p = 0.375 + 0.625 * (i % 100) / 99.0;
    samples.push_back({p, std::max(0.05, truth.value_at(p) + noise(rng))});
  }
  samples.push_back({1.0, 1.0});
  for (auto _ : state) {
    auto c = fit_curve("bench", samples);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_FitCurve);

void BM_PeakWindow(benchmark::State& state) {
  LoadSeries series;
  series.cadence_s = 300.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-50.0, 50.0);
  for (int i = 0; i < 7 * 24 * 12; ++i) {  // one week at 5-minute cadence
    const double diurnal = 4000.0 + 800.0 * std::sin(i * 2.0 * 3.14159265 / (24 * 12));
    series.points.push_back({static_cast<std::int64_t>(i) * 300, diurnal + jitter(rng)});
  }
  for (auto _ : state) {
    auto w = find_peak_window(series, 10800.0);
    benchmark::DoNotOptimize(w);
  }
}
BENCHMARK(BM_PeakWindow);

}  // namespace

BENCHMARK_MAIN();
