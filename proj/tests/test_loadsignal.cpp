// Tests for grid-signal ingestion: load CSV parsing, peak-window search,
// trailing baselines, and the event templates built from them.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "gridflex/errors.hpp"
#include "gridflex/loadsignal.hpp"

using namespace gridflex;

namespace {

LoadSeries series_of(const std::vector<double>& mw, double cadence_s,
                     std::int64_t t0 = 1721224800) {
  LoadSeries s;
  s.cadence_s = cadence_s;
  for (size_t i = 0; i < mw.size(); ++i) {
    s.points.push_back(
        LoadPoint{t0 + static_cast<std::int64_t>(i * cadence_s), mw[i]});
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

TEST_CASE("load CSV accepts ISO-8601 and epoch timestamps") {
  std::string iso =
      "timestamp,mw\n"
      "2024-07-17T14:00:00Z,5000\n"
      "2024-07-17T14:05:00Z,5100\n"
      "2024-07-17T14:10:00Z,5250.5\n";
  LoadSeries a = parse_load_csv(iso);
  REQUIRE(a.size() == 3);
  CHECK(a.cadence_s == doctest::Approx(300.0));
  CHECK(a.points[0].mw == doctest::Approx(5000.0));
  CHECK(a.points[2].mw == doctest::Approx(5250.5));
  CHECK(a.points[1].t_epoch_s - a.points[0].t_epoch_s == 300);

  std::string epoch =
      "timestamp,mw\n"
      "1721224800,5000\n"
      "1721225100,5100\n";
  LoadSeries b = parse_load_csv(epoch);
  REQUIRE(b.size() == 2);
  CHECK(b.points[0].t_epoch_s == 1721224800);

  // The two spellings of the same instant agree.
  CHECK(a.points[0].t_epoch_s == b.points[0].t_epoch_s);
}

TEST_CASE("load CSV tolerates comments and a missing header") {
  std::string text =
      "# Phoenix feeder, 5-minute cadence\n"
      "1721224800,5000\n"
      "# mid-file comment\n"
      "1721225100,5100\n"
      "1721225400,5200\n";
  LoadSeries s = parse_load_csv(text);
  CHECK(s.size() == 3);
  CHECK(s.cadence_s == doctest::Approx(300.0));
}

TEST_CASE("load CSV rejects malformed and ill-ordered input") {
  CHECK_THROWS_AS(parse_load_csv(""), ParseError);
  CHECK_THROWS_AS(parse_load_csv("timestamp,mw\n1721224800,5000\n"),
                  ParseError);  // a single sample has no cadence
  CHECK_THROWS_AS(parse_load_csv("1721224800,5000\nnot-a-time,5100\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_load_csv("1721224800,5000\n1721225100,watts\n"),
                  ParseError);
  CHECK_THROWS_AS(
      parse_load_csv("1721225100,5000\n1721224800,5100\n"),
      NonMonotoneTimeError);
  CHECK_THROWS_AS(
      parse_load_csv("1721224800,5000\n1721224800,5100\n"),
      NonMonotoneTimeError);
  CHECK_THROWS_AS(
      parse_load_csv("1721224800,5000\n1721225100,5100\n1721225700,5200\n"),
      NonUniformCadenceError);
}

TEST_CASE("parse errors carry the offending line number") {
  try {
    parse_load_csv("1721224800,5000\n1721225100,5100\nbroken\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Peak window
// ---------------------------------------------------------------------------

TEST_CASE("peak window finds the hottest stretch of the afternoon") {
  // 24 hourly samples with a peak plateau at hours 14-16.
  std::vector<double> mw(24, 4000.0);
  mw[13] = 4800.0;
  mw[14] = 5200.0;
  mw[15] = 5400.0;
  mw[16] = 5100.0;
  LoadSeries s = series_of(mw, 3600.0, 0);

  PeakWindow w = find_peak_window(s, 3 * 3600.0);
  CHECK(w.start_index == 14);
  CHECK(w.samples == 3);
  CHECK(w.mean_mw == doctest::Approx((5200.0 + 5400.0 + 5100.0) / 3.0));
  CHECK(w.start_epoch_s == 14 * 3600);
  CHECK(w.end_epoch_s == 17 * 3600);
}

TEST_CASE("peak window ties resolve to the earliest start") {
  std::vector<double> mw{1.0, 7.0, 7.0, 1.0, 7.0, 7.0, 1.0};
  LoadSeries s = series_of(mw, 60.0, 0);
  PeakWindow w = find_peak_window(s, 120.0);
  CHECK(w.start_index == 1);
}

TEST_CASE("peak window matches a brute-force scan on random series") {
  std::mt19937_64 rng(20240720);
  std::uniform_real_distribution<double> mw(1000.0, 9000.0);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 10 + rng() % 120;
    std::vector<double> v(n);
    for (auto& x : v) x = mw(rng);
    LoadSeries s = series_of(v, 300.0);
    size_t w = 1 + rng() % n;

    double best = -1.0;
    size_t best_start = 0;
    for (size_t start = 0; start + w <= n; ++start) {
      double sum = 0.0;
      for (size_t k = 0; k < w; ++k) sum += v[start + k];
      if (sum / w > best + 1e-12) {
        best = sum / w;
        best_start = start;
      }
    }

    PeakWindow found = find_peak_window(s, w * 300.0);
    CHECK(found.start_index == best_start);
    CHECK(found.mean_mw == doctest::Approx(best));
    CHECK(found.samples == w);
  }
}

TEST_CASE("peak window refuses a window longer than the series") {
  LoadSeries s = series_of({1.0, 2.0, 3.0}, 300.0);
  CHECK_THROWS_AS(find_peak_window(s, 4 * 300.0), WindowTooLongError);
  CHECK_NOTHROW(find_peak_window(s, 3 * 300.0));
}

// ---------------------------------------------------------------------------
// Trailing mean
// ---------------------------------------------------------------------------

TEST_CASE("trailing mean averages exactly the lookback samples") {
  LoadSeries s = series_of({100.0, 200.0, 300.0, 400.0, 500.0}, 300.0, 0);
  // Lookback of two samples ending at t=1500 (exclusive): samples at 900, 1200.
  CHECK(trailing_mean(s, 1500, 600.0) == doctest::Approx(450.0));
  // Full-series lookback is the plain mean.
  CHECK(trailing_mean(s, 1500, 1500.0) == doctest::Approx(300.0));
  // History shorter than the lookback is an error, not a silent short mean.
  CHECK_THROWS_AS(trailing_mean(s, 1500, 1800.0), InsufficientHistoryError);
  CHECK_THROWS_AS(trailing_mean(s, 900, 1200.0), InsufficientHistoryError);
}

// ---------------------------------------------------------------------------
// Event templates
// ---------------------------------------------------------------------------

TEST_CASE("the single-step template spans 4.5 hours by default") {
  EventSpec ev = make_peak_shave(100000.0);
  CHECK(ev.baseline_watts == doctest::Approx(100000.0));
  REQUIRE(ev.steps.size() == 1);
  CHECK(ev.steps[0].target_reduction_fraction == doctest::Approx(0.25));
  CHECK(ev.steps[0].ramp_s == doctest::Approx(900.0));
  CHECK(ev.steps[0].hold_s == doctest::Approx(10800.0));
  CHECK(ev.recovery_ramp_s == doctest::Approx(900.0));
  CHECK(ev.snapback_window_s == doctest::Approx(3600.0));
  CHECK(ev.span_s() == doctest::Approx(16200.0));
  CHECK(ev.deepest_reduction() == doctest::Approx(0.25));
}

TEST_CASE("the two-step template deepens 15% to a cumulative 25%") {
  EventSpec ev = make_two_step_emergency(100000.0);
  REQUIRE(ev.steps.size() == 2);
  CHECK(ev.steps[0].target_reduction_fraction == doctest::Approx(0.15));
  CHECK(ev.steps[1].target_reduction_fraction == doctest::Approx(0.25));
  CHECK(ev.steps[0].hold_s == doctest::Approx(3600.0));
  CHECK(ev.steps[1].hold_s == doctest::Approx(5400.0));
  CHECK(ev.span_s() == doctest::Approx(15300.0));
  CHECK(ev.deepest_reduction() == doctest::Approx(0.25));
}

TEST_CASE("template parameters override the defaults") {
  PeakShaveParams p;
  p.reduction_fraction = 0.10;
  p.hold_s = 7200.0;
  EventSpec ev = make_peak_shave(50000.0, p);
  CHECK(ev.steps[0].target_reduction_fraction == doctest::Approx(0.10));
  CHECK(ev.span_s() == doctest::Approx(900.0 + 7200.0 + 900.0 + 3600.0));
}
