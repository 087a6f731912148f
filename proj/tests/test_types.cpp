#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gridflex/errors.hpp"
#include "gridflex/types.hpp"

using namespace gridflex;

namespace {

JobSpec make_job(const std::string& id, int nodes, int flex,
                 const std::string& curve = "pretrain") {
  JobSpec j;
  j.id = id;
  j.kind = JobKind::PreTraining;
  j.nodes = nodes;
  j.flex = make_tier(flex_level_from_int(flex));
  j.curve_class = curve;
  return j;
}

const std::set<std::string> kClasses{"pretrain", "finetune", "inference"};

}  // namespace

TEST_CASE("tier budgets are the four frozen fractions") {
  CHECK(budget_for(FlexLevel::Flex0) == 0.00);
  CHECK(budget_for(FlexLevel::Flex1) == 0.10);
  CHECK(budget_for(FlexLevel::Flex2) == 0.25);
  CHECK(budget_for(FlexLevel::Flex3) == 0.50);
}

TEST_CASE("flex levels parse from integers and reject the rest") {
  CHECK(flex_level_from_int(0) == FlexLevel::Flex0);
  CHECK(flex_level_from_int(3) == FlexLevel::Flex3);
  CHECK_THROWS_AS(flex_level_from_int(-1), InvalidParamsError);
  CHECK_THROWS_AS(flex_level_from_int(4), InvalidParamsError);
}

TEST_CASE("job kinds round-trip through their names") {
  for (JobKind k : {JobKind::PreTraining, JobKind::FineTuning, JobKind::Inference})
    CHECK(job_kind_from_name(job_kind_name(k)) == k);
  CHECK_THROWS_AS(job_kind_from_name("training"), InvalidParamsError);
}

TEST_CASE("default cluster: 256 GPUs, min cap fraction 0.375") {
  ClusterSpec c;
  c.validate();
  CHECK(c.total_gpus() == 256);
  CHECK(c.min_power_fraction() == doctest::Approx(150.0 / 400.0));
}

TEST_CASE("cluster validation rejects nonsense") {
  ClusterSpec c;
  c.gpu_min_cap_watts = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ClusterSpec{};
  c.gpu_min_cap_watts = c.gpu_tdp_watts + 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ClusterSpec{};
  c.total_nodes = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("actions on a Flex0 job are always rejected") {
  ClusterSpec cluster;
  JobSpec j = make_job("inf_a", 4, 0);
  for (ActionKind a : std::initializer_list<ActionKind>{
           SetCap{300.0}, Pause{}, Resume{}, Resize{2}, ClearCap{}})
    CHECK_THROWS_AS(validate_action({j.id, a}, j, cluster), ValidationError);
}

TEST_CASE("cap bounds and resize bounds are enforced") {
  ClusterSpec cluster;
  JobSpec j = make_job("pt_a", 8, 3);
  CHECK_THROWS_AS(validate_action({j.id, SetCap{149.0}}, j, cluster), ValidationError);
  CHECK_THROWS_AS(validate_action({j.id, SetCap{401.0}}, j, cluster), ValidationError);
  CHECK_NOTHROW(validate_action({j.id, SetCap{150.0}}, j, cluster));
  CHECK_NOTHROW(validate_action({j.id, SetCap{400.0}}, j, cluster));
  CHECK_THROWS_AS(validate_action({j.id, Resize{0}}, j, cluster), ValidationError);
  CHECK_THROWS_AS(validate_action({j.id, Resize{9}}, j, cluster), ValidationError);
  CHECK_NOTHROW(validate_action({j.id, Resize{1}}, j, cluster));
}

TEST_CASE("apply_action walks a job through its lifecycle") {
  ClusterSpec cluster;
  JobState st = initial_state(make_job("pt_a", 8, 3), cluster);
  CHECK(st.status == JobStatus::Running);
  CHECK(st.cap_watts == 400.0);
  CHECK(st.nodes == 8);

  apply_action(st, SetCap{250.0}, cluster);
  CHECK(st.cap_watts == 250.0);
  apply_action(st, Pause{}, cluster);
  CHECK(st.status == JobStatus::Paused);
  CHECK(st.cap_watts == 250.0);  // cap survives a pause
  apply_action(st, Resume{}, cluster);
  CHECK(st.status == JobStatus::Running);
  apply_action(st, Resize{4}, cluster);
  CHECK(st.nodes == 4);
  apply_action(st, ClearCap{}, cluster);
  CHECK(st.cap_watts == 400.0);
}

TEST_CASE("ensemble validation catches the classic mistakes") {
  ClusterSpec cluster;
  SUBCASE("duplicate ids") {
    CHECK_THROWS_AS(validate_ensemble("e", {make_job("a", 4, 3), make_job("a", 4, 2)},
                                      cluster, kClasses),
                    DuplicateIdError);
  }
  SUBCASE("over-allocation") {
    CHECK_THROWS_AS(validate_ensemble("e", {make_job("a", 20, 3), make_job("b", 13, 2)},
                                      cluster, kClasses),
                    OverAllocatedError);
  }
  SUBCASE("unknown curve class") {
    CHECK_THROWS_AS(
        validate_ensemble("e", {make_job("a", 4, 3, "mystery")}, cluster, kClasses),
        UnknownCurveClassError);
  }
  SUBCASE("tier budget must match the level") {
    JobSpec j = make_job("a", 4, 3);
    j.flex.max_avg_throughput_reduction = 0.10;
    CHECK_THROWS_AS(validate_ensemble("e", {j}, cluster, kClasses), ValidationError);
  }
  SUBCASE("a full 32-node ensemble fits exactly") {
    const Ensemble e = validate_ensemble(
        "e", {make_job("a", 20, 3), make_job("b", 12, 2)}, cluster, kClasses);
    CHECK(e.node_sum() == 32);
    CHECK(e.find("a") != nullptr);
    CHECK(e.find("zzz") == nullptr);
  }
}

TEST_CASE("events must be cumulative-monotone with sane durations") {
  EventSpec ev;
  ev.baseline_watts = 100000.0;
  CHECK_THROWS_AS(ev.validate(), EmptyEventError);

  ev.steps = {{0.25, 900.0, 3600.0}, {0.15, 900.0, 3600.0}};  // shrinking cut
  CHECK_THROWS_AS(ev.validate(), InvalidParamsError);

  ev.steps = {{0.15, 900.0, 3600.0}, {0.25, 900.0, 5400.0}};
  ev.recovery_ramp_s = 900.0;
  ev.snapback_window_s = 3600.0;
  CHECK_NOTHROW(ev.validate());
  CHECK(ev.deepest_reduction() == doctest::Approx(0.25));
  CHECK(ev.span_s() == doctest::Approx(900 + 3600 + 900 + 5400 + 900 + 3600));
}

TEST_CASE("snapback limit defaults to the baseline and may not exceed it") {
  EventSpec ev;
  ev.baseline_watts = 100000.0;
  ev.steps = {{0.25, 900.0, 10800.0}};
  ev.recovery_ramp_s = 900.0;
  ev.snapback_window_s = 3600.0;
  CHECK(ev.resolved_snapback_limit() == doctest::Approx(100000.0));
  ev.snapback_limit_watts = 98000.0;
  CHECK_NOTHROW(ev.validate());
  CHECK(ev.resolved_snapback_limit() == doctest::Approx(98000.0));
  ev.snapback_limit_watts = 100001.0;
  CHECK_THROWS_AS(ev.validate(), InvalidParamsError);
}
