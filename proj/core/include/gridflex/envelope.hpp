#pragma once

#include <string>
#include <vector>

#include "gridflex/types.hpp"

namespace gridflex {

enum class PhaseKind { Pre, RampDown, Hold, RampUp, Post };

std::string phase_name(PhaseKind kind);

/// Contiguous stretch of the envelope with a single linear target segment.
struct PhaseSpan {
  PhaseKind kind = PhaseKind::Pre;
  int step_index = -1;  // which event step a ramp/hold belongs to
  double start_s = 0.0;
  double end_s = 0.0;
  double level_start_w = 0.0;
  double level_end_w = 0.0;
};

/// Target power trajectory for a curtailment event, sampled on the control
/// interval. Ramps interpolate linearly between adjacent hold levels; the
/// post phase sits at the snapback limit (never above baseline).
class PowerEnvelope {
 public:
  PowerEnvelope() = default;

  double baseline_watts() const { return baseline_w_; }
  double interval_s() const { return interval_s_; }
  double span_s() const { return span_s_; }
  int num_intervals() const { return static_cast<int>(samples_.size()); }

  /// Continuous target at an absolute offset from envelope start.
  double target_at(double t_s) const;
  /// Target at the start of interval i (what the planner tracks).
  double sample(int interval) const { return samples_.at(interval); }
  const std::vector<double>& samples() const { return samples_; }

  const PhaseSpan& phase_at(double t_s) const;
  const PhaseSpan& phase_of_interval(int interval) const;
  const std::vector<PhaseSpan>& phases() const { return phases_; }

  /// Interval indices whose start lies inside the given phase kind
  /// (and step, for ramps/holds; pass -1 to take every step).
  std::vector<int> intervals_of(PhaseKind kind, int step_index = -1) const;

  friend PowerEnvelope build_envelope(const EventSpec&, double, double);

 private:
  double baseline_w_ = 0.0;
  double interval_s_ = 0.0;
  double span_s_ = 0.0;
  std::vector<PhaseSpan> phases_;
  std::vector<double> samples_;
};

/// Builds the envelope for an event on a control interval. `pre_s` adds an
/// optional lead-in at baseline before the first ramp. Phase boundaries are
/// kept at their exact times; intervals are attributed to the phase their
/// start falls into. Throws on interval_s <= 0 or invalid events.
PowerEnvelope build_envelope(const EventSpec& event, double interval_s,
                             double pre_s = 0.0);

}  // namespace gridflex
