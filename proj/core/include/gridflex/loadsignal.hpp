#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridflex/types.hpp"

namespace gridflex {

/// One sample of a utility load history: epoch timestamp, demand in MW.
struct LoadPoint {
  std::int64_t t_epoch_s = 0;
  double mw = 0.0;
};

/// Uniform-cadence, strictly increasing load history.
struct LoadSeries {
  std::vector<LoadPoint> points;
  double cadence_s = 0.0;

  size_t size() const { return points.size(); }
  double duration_s() const { return points.size() * cadence_s; }
};

/// Parses "timestamp,mw" CSV text. Timestamps are ISO-8601 UTC
/// ("2024-07-17T14:05:00Z") or raw epoch seconds. A header row is skipped.
/// Throws ParseError (with line number), NonMonotoneTimeError, or
/// NonUniformCadenceError.
LoadSeries parse_load_csv(const std::string& text);

/// parse_load_csv over a file's contents.
LoadSeries load_load_csv(const std::string& path);

struct PeakWindow {
  std::int64_t start_epoch_s = 0;
  std::int64_t end_epoch_s = 0;  // exclusive
  double mean_mw = 0.0;
  size_t start_index = 0;
  size_t samples = 0;
};

/// Contiguous window of window_s seconds with the highest average demand;
/// earliest window wins ties. Throws WindowTooLongError when the series is
/// shorter than the window.
PeakWindow find_peak_window(const LoadSeries& series, double window_s);

/// Mean demand over the lookback_s of history ending (exclusively) at
/// t_end_epoch_s. Throws InsufficientHistoryError when the series does not
/// cover the whole lookback.
double trailing_mean(const LoadSeries& series, std::int64_t t_end_epoch_s,
                     double lookback_s);

/// Single-step shave: ramp down, hold, ramp back, then a recovery watch
/// window. Defaults span 4.5 hours end to end.
struct PeakShaveParams {
  double reduction_fraction = 0.25;
  double ramp_s = 900.0;
  double hold_s = 10800.0;
  double recovery_ramp_s = 900.0;
  double snapback_window_s = 3600.0;
};
EventSpec make_peak_shave(double baseline_watts, const PeakShaveParams& params = {});

/// Two-stage emergency: a first cut, then a deeper one (fractions are
/// cumulative versus baseline), each with its own hold.
struct TwoStepParams {
  double first_reduction_fraction = 0.15;
  double second_reduction_fraction = 0.25;
  double ramp_s = 900.0;
  double hold1_s = 3600.0;
  double hold2_s = 5400.0;
  double recovery_ramp_s = 900.0;
  double snapback_window_s = 3600.0;
};
EventSpec make_two_step_emergency(double baseline_watts, const TwoStepParams& params = {});

}  // namespace gridflex
