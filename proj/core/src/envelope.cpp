#include "gridflex/envelope.hpp"

#include <algorithm>
#include <cmath>

#include "gridflex/errors.hpp"

namespace gridflex {

std::string phase_name(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::Pre: return "pre";
    case PhaseKind::RampDown: return "ramp_down";
    case PhaseKind::Hold: return "hold";
    case PhaseKind::RampUp: return "ramp_up";
    case PhaseKind::Post: return "post";
  }
  return "unknown";
}

double PowerEnvelope::target_at(double t_s) const {
  const PhaseSpan& ph = phase_at(t_s);
  const double len = ph.end_s - ph.start_s;
  if (len <= 0.0) return ph.level_end_w;
  const double u = std::clamp((t_s - ph.start_s) / len, 0.0, 1.0);
  return ph.level_start_w + u * (ph.level_end_w - ph.level_start_w);
}

const PhaseSpan& PowerEnvelope::phase_at(double t_s) const {
  if (t_s < 0.0) throw NegativeTimeError("envelope queried before start");
  for (const auto& ph : phases_) {
    if (t_s < ph.end_s || &ph == &phases_.back()) return ph;
  }
  return phases_.back();
}

const PhaseSpan& PowerEnvelope::phase_of_interval(int interval) const {
  return phase_at(interval * interval_s_);
}

std::vector<int> PowerEnvelope::intervals_of(PhaseKind kind, int step_index) const {
  std::vector<int> out;
  for (int i = 0; i < num_intervals(); ++i) {
    const PhaseSpan& ph = phase_of_interval(i);
    if (ph.kind == kind && (step_index < 0 || ph.step_index == step_index))
      out.push_back(i);
  }
  return out;
}

PowerEnvelope build_envelope(const EventSpec& event, double interval_s, double pre_s) {
  event.validate();
  if (interval_s <= 0.0) throw InvalidParamsError("interval_s must be positive");
  if (pre_s < 0.0) throw InvalidParamsError("pre_s must be non-negative");

  PowerEnvelope env;
  env.baseline_w_ = event.baseline_watts;
  env.interval_s_ = interval_s;

  const double base = event.baseline_watts;
  double t = 0.0;
  double level = base;
  auto push = [&](PhaseKind kind, int step, double dur, double to_level) {
    if (dur <= 0.0) {
      level = to_level;
      return;
    }
    env.phases_.push_back({kind, step, t, t + dur, level, to_level});
    t += dur;
    level = to_level;
  };

  if (pre_s > 0.0) push(PhaseKind::Pre, -1, pre_s, base);
  for (size_t k = 0; k < event.steps.size(); ++k) {
    const auto& s = event.steps[k];
    const double hold_level = base * (1.0 - s.target_reduction_fraction);
    push(PhaseKind::RampDown, static_cast<int>(k), s.ramp_s, hold_level);
    push(PhaseKind::Hold, static_cast<int>(k), s.hold_s, hold_level);
  }
  const double post_level = event.resolved_snapback_limit();
  push(PhaseKind::RampUp, -1, event.recovery_ramp_s, post_level);
  push(PhaseKind::Post, -1, event.snapback_window_s, post_level);

  if (env.phases_.empty())
    throw EmptyEventError("event produces an empty envelope");

  env.span_s_ = t;
  const int n = static_cast<int>(std::ceil(t / interval_s - 1e-9));
  env.samples_.reserve(n);
  for (int i = 0; i < n; ++i) env.samples_.push_back(env.target_at(i * interval_s));
  return env;
}

}  // namespace gridflex
