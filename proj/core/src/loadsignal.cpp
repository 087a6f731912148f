#include "gridflex/loadsignal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "gridflex/errors.hpp"

namespace gridflex {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_epoch(const std::string& tok, std::int64_t& out) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  try {
    out = std::stoll(tok);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

bool parse_iso8601_utc(const std::string& tok, std::int64_t& out) {
  int y, mo, d, h, mi, s;
  char zone = '\0';
  const int got =
      std::sscanf(tok.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &zone);
  if (got < 6) return false;
  if (got == 7 && zone != 'Z' && zone != 'z' && zone != '+') return false;
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = s;
  const time_t t = timegm(&tm);
  if (t == static_cast<time_t>(-1)) return false;
  out = static_cast<std::int64_t>(t);
  return true;
}

}  // namespace

LoadSeries parse_load_csv(const std::string& text) {
  LoadSeries series;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'timestamp,mw'");
    const std::string ts = trim(line.substr(0, comma));
    const std::string val = trim(line.substr(comma + 1));

    std::int64_t t = 0;
    if (!parse_epoch(ts, t) && !parse_iso8601_utc(ts, t)) {
      if (line_no == 1) continue;  // header row
      throw ParseError("line " + std::to_string(line_no) + ": bad timestamp '" + ts +
                       "'");
    }
    double mw = 0.0;
    try {
      size_t used = 0;
      mw = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": bad value '" + val + "'");
    }
    if (!series.points.empty() && t <= series.points.back().t_epoch_s)
      throw NonMonotoneTimeError("line " + std::to_string(line_no) +
                                 ": timestamps must strictly increase");
    series.points.push_back({t, mw});
  }
  if (series.points.size() < 2)
    throw ParseError("load history needs at least two samples");
  series.cadence_s =
      static_cast<double>(series.points[1].t_epoch_s - series.points[0].t_epoch_s);
  for (size_t i = 2; i < series.points.size(); ++i) {
    const double dt = static_cast<double>(series.points[i].t_epoch_s -
                                          series.points[i - 1].t_epoch_s);
    if (std::abs(dt - series.cadence_s) > 1e-9)
      throw NonUniformCadenceError("sample " + std::to_string(i) +
                                   " breaks the uniform cadence");
  }
  return series;
}

LoadSeries load_load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot read file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_load_csv(buf.str());
}

PeakWindow find_peak_window(const LoadSeries& series, double window_s) {
  if (window_s <= 0.0) throw InvalidParamsError("window_s must be positive");
  const auto w = static_cast<size_t>(std::llround(window_s / series.cadence_s));
  if (w == 0) throw InvalidParamsError("window shorter than the sample cadence");
  if (w > series.size())
    throw WindowTooLongError("window of " + std::to_string(window_s) +
                             " s exceeds the " +
                             std::to_string(series.duration_s()) + " s history");
  double sum = 0.0;
  for (size_t i = 0; i < w; ++i) sum += series.points[i].mw;
  double best = sum;
  size_t best_start = 0;
  for (size_t i = w; i < series.size(); ++i) {
    sum += series.points[i].mw - series.points[i - w].mw;
    if (sum > best + 1e-12) {  // strict: earliest window wins ties
      best = sum;
      best_start = i - w + 1;
    }
  }
  PeakWindow out;
  out.start_index = best_start;
  out.samples = w;
  out.start_epoch_s = series.points[best_start].t_epoch_s;
  out.end_epoch_s =
      out.start_epoch_s + static_cast<std::int64_t>(std::llround(w * series.cadence_s));
  out.mean_mw = best / static_cast<double>(w);
  return out;
}

double trailing_mean(const LoadSeries& series, std::int64_t t_end_epoch_s,
                     double lookback_s) {
  if (lookback_s <= 0.0) throw InvalidParamsError("lookback_s must be positive");
  const std::int64_t t0 = t_end_epoch_s - static_cast<std::int64_t>(std::llround(lookback_s));
  double sum = 0.0;
  size_t count = 0;
  for (const auto& p : series.points) {
    if (p.t_epoch_s >= t0 && p.t_epoch_s < t_end_epoch_s) {
      sum += p.mw;
      ++count;
    }
  }
  const auto expected = static_cast<size_t>(std::llround(lookback_s / series.cadence_s));
  if (count < expected)
    throw InsufficientHistoryError("history covers only " + std::to_string(count) +
                                   " of " + std::to_string(expected) +
                                   " samples in the lookback");
  return sum / static_cast<double>(count);
}

EventSpec make_peak_shave(double baseline_watts, const PeakShaveParams& params) {
  EventSpec ev;
  ev.baseline_watts = baseline_watts;
  ev.steps.push_back({params.reduction_fraction, params.ramp_s, params.hold_s});
  ev.recovery_ramp_s = params.recovery_ramp_s;
  ev.snapback_window_s = params.snapback_window_s;
  ev.validate();
  return ev;
}

EventSpec make_two_step_emergency(double baseline_watts, const TwoStepParams& params) {
  EventSpec ev;
  ev.baseline_watts = baseline_watts;
  ev.steps.push_back({params.first_reduction_fraction, params.ramp_s, params.hold1_s});
  ev.steps.push_back({params.second_reduction_fraction, params.ramp_s, params.hold2_s});
  ev.recovery_ramp_s = params.recovery_ramp_s;
  ev.snapback_window_s = params.snapback_window_s;
  ev.validate();
  return ev;
}

}  // namespace gridflex
