#include "gridflex/response.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gridflex/errors.hpp"

namespace gridflex {

namespace {

constexpr double kEps = 1e-9;

void check_knots(const std::string& class_id, const std::vector<CurveSample>& knots) {
  if (knots.size() < 2)
    throw InsufficientSamplesError("curve '" + class_id + "' needs at least two knots");
  for (size_t i = 0; i < knots.size(); ++i) {
    if (knots[i].power_fraction <= 0.0 || knots[i].power_fraction > 1.0 + kEps)
      throw InvalidParamsError("curve '" + class_id + "' has a power fraction outside (0,1]");
    if (knots[i].norm_throughput <= 0.0)
      throw NonPositiveThroughputError("curve '" + class_id + "' has non-positive throughput");
    if (i > 0) {
      if (knots[i].power_fraction <= knots[i - 1].power_fraction + kEps)
        throw InvalidParamsError("curve '" + class_id + "' knots must strictly increase in power");
      if (knots[i].norm_throughput + kEps < knots[i - 1].norm_throughput)
        throw InvalidParamsError("curve '" + class_id + "' must be non-decreasing");
    }
  }
  if (std::abs(knots.back().power_fraction - 1.0) > 1e-6)
    throw InvalidParamsError("curve '" + class_id + "' must end at full power");
  if (std::abs(knots.back().norm_throughput - 1.0) > 1e-9)
    throw InvalidParamsError("curve '" + class_id + "' must reach throughput 1 at full power");
}

}  // namespace

ResponseCurve::ResponseCurve(std::string class_id, std::vector<CurveSample> knots)
    : class_id_(std::move(class_id)), knots_(std::move(knots)) {
  check_knots(class_id_, knots_);
  knots_.back().power_fraction = 1.0;
  knots_.back().norm_throughput = 1.0;
}

double ResponseCurve::value_at(double power_fraction) const {
  const double p = std::clamp(power_fraction, knots_.front().power_fraction, 1.0);
  for (size_t i = 1; i < knots_.size(); ++i) {
    if (p <= knots_[i].power_fraction + kEps) {
      const auto& a = knots_[i - 1];
      const auto& b = knots_[i];
      if (p <= a.power_fraction) return a.norm_throughput;
      const double u = (p - a.power_fraction) / (b.power_fraction - a.power_fraction);
      return a.norm_throughput + u * (b.norm_throughput - a.norm_throughput);
    }
  }
  return 1.0;
}

double ResponseCurve::invert(double norm_throughput) const {
  const double t = norm_throughput;
  if (t <= knots_.front().norm_throughput) return knots_.front().power_fraction;
  for (size_t i = 1; i < knots_.size(); ++i) {
    const auto& a = knots_[i - 1];
    const auto& b = knots_[i];
    if (t <= b.norm_throughput + kEps) {
      if (b.norm_throughput - a.norm_throughput < kEps) return a.power_fraction;
      const double u = (t - a.norm_throughput) / (b.norm_throughput - a.norm_throughput);
      return a.power_fraction + u * (b.power_fraction - a.power_fraction);
    }
  }
  return 1.0;
}

std::vector<double> isotonic_fit(const std::vector<double>& values,
                                 const std::vector<double>& weights) {
  const size_t n = values.size();
  std::vector<double> w = weights.empty() ? std::vector<double>(n, 1.0) : weights;
  if (w.size() != n) throw InvalidParamsError("isotonic_fit: weights/values size mismatch");

  // Pool-adjacent-violators over blocks carrying (weighted mean, weight, count).
  std::vector<double> mean, weight;
  std::vector<size_t> count;
  mean.reserve(n);
  weight.reserve(n);
  count.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    mean.push_back(values[i]);
    weight.push_back(w[i]);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const double merged_w = weight[weight.size() - 2] + weight.back();
      const double merged_m = (mean[mean.size() - 2] * weight[weight.size() - 2] +
                               mean.back() * weight.back()) /
                              merged_w;
      mean.pop_back();
      weight.pop_back();
      const size_t c = count.back();
      count.pop_back();
      mean.back() = merged_m;
      weight.back() = merged_w;
      count.back() += c;
    }
  }
  std::vector<double> fitted;
  fitted.reserve(n);
  for (size_t b = 0; b < mean.size(); ++b)
    fitted.insert(fitted.end(), count[b], mean[b]);
  return fitted;
}

ResponseCurve fit_curve(std::string class_id, std::vector<CurveSample> samples) {
  for (const auto& s : samples)
    if (s.norm_throughput <= 0.0)
      throw NonPositiveThroughputError("profile for '" + class_id +
                                       "' contains non-positive throughput");
  std::sort(samples.begin(), samples.end(),
            [](const CurveSample& a, const CurveSample& b) {
              return a.power_fraction < b.power_fraction;
            });

  // Pool samples at (numerically) equal power fractions into one weighted point.
  std::vector<double> p, t, w;
  for (const auto& s : samples) {
    if (!p.empty() && std::abs(s.power_fraction - p.back()) < 1e-9) {
      t.back() = (t.back() * w.back() + s.norm_throughput) / (w.back() + 1.0);
      w.back() += 1.0;
    } else {
      p.push_back(s.power_fraction);
      t.push_back(s.norm_throughput);
      w.push_back(1.0);
    }
  }
  if (p.size() < 2)
    throw InsufficientSamplesError("profile for '" + class_id +
                                   "' needs samples at two or more power fractions");
  if (std::abs(p.back() - 1.0) > 1e-6)
    throw InsufficientSamplesError("profile for '" + class_id +
                                   "' must include a sample at full power");

  std::vector<double> fitted = isotonic_fit(t, w);
  std::vector<CurveSample> knots(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    knots[i].power_fraction = p[i];
    knots[i].norm_throughput = std::min(fitted[i], 1.0);
  }
  knots.back().power_fraction = 1.0;
  knots.back().norm_throughput = 1.0;  // defined to be exact at full power
  for (size_t i = 1; i < knots.size(); ++i)
    knots[i].norm_throughput = std::max(knots[i].norm_throughput, knots[i - 1].norm_throughput);
  return ResponseCurve(std::move(class_id), std::move(knots));
}

std::vector<CurveSample> load_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("power_fraction", 0) != 0)
    throw ParseError("profile '" + path.string() +
                     "' must start with header power_fraction,norm_throughput");
  std::vector<CurveSample> samples;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b))
      throw ParseError("profile '" + path.string() + "': bad row at line " +
                       std::to_string(lineno));
    try {
      samples.push_back({std::stod(a), std::stod(b)});
    } catch (const std::exception&) {
      throw ParseError("profile '" + path.string() + "': bad number at line " +
                       std::to_string(lineno));
    }
  }
  return samples;
}

CurveLibrary CurveLibrary::defaults() {
  CurveLibrary lib;
  // Synthetic class shapes calibrated qualitatively: capping hurts
  // pretraining the most through the mid range, inference the least,
  // and every class loses only a few points near full power.
  lib.add(ResponseCurve("pretrain", {{0.375, 0.45},
                                     {0.500, 0.55},
                                     {0.625, 0.65},
                                     {0.750, 0.78},
                                     {0.875, 0.90},
                                     {1.000, 1.00}}));
  lib.add(ResponseCurve("finetune", {{0.375, 0.55},
                                     {0.500, 0.70},
                                     {0.625, 0.80},
                                     {0.750, 0.87},
                                     {0.875, 0.94},
                                     {1.000, 1.00}}));
  lib.add(ResponseCurve("inference", {{0.375, 0.60},
                                      {0.500, 0.75},
                                      {0.625, 0.84},
                                      {0.750, 0.90},
                                      {0.875, 0.96},
                                      {1.000, 1.00}}));
  return lib;
}

CurveLibrary CurveLibrary::parse_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("curve library: ") + e.what());
  }
  if (!doc.contains("classes") || !doc["classes"].is_object())
    throw ParseError("curve library: missing 'classes' object");
  CurveLibrary lib;
  for (const auto& [name, spec] : doc["classes"].items()) {
    if (!spec.contains("knots") || !spec["knots"].is_array())
      throw ParseError("curve class '" + name + "': missing 'knots' array");
    std::vector<CurveSample> knots;
    for (const auto& k : spec["knots"]) {
      if (!k.is_array() || k.size() != 2)
        throw ParseError("curve class '" + name + "': knots must be [p, t] pairs");
      knots.push_back({k[0].get<double>(), k[1].get<double>()});
    }
    lib.add(ResponseCurve(name, std::move(knots)));
  }
  return lib;
}

CurveLibrary CurveLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open curve library '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str());
}

std::string CurveLibrary::to_json_text() const {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [name, curve] : curves_) {
    nlohmann::json knots = nlohmann::json::array();
    for (const auto& k : curve.knots())
      knots.push_back({k.power_fraction, k.norm_throughput});
    classes[name] = {{"knots", knots}};
  }
  return nlohmann::json{{"classes", classes}}.dump(2);
}

void CurveLibrary::add(ResponseCurve curve) {
  const std::string id = curve.class_id();
  curves_.insert_or_assign(id, std::move(curve));
}

bool CurveLibrary::contains(const std::string& class_id) const {
  return curves_.count(class_id) > 0;
}

const ResponseCurve& CurveLibrary::at(const std::string& class_id) const {
  auto it = curves_.find(class_id);
  if (it == curves_.end())
    throw UnknownCurveClassError("unknown curve class '" + class_id + "'");
  return it->second;
}

std::set<std::string> CurveLibrary::class_ids() const {
  std::set<std::string> ids;
  for (const auto& [name, _] : curves_) ids.insert(name);
  return ids;
}

double ScalingModel::factor(int n_new, int n_orig) const {
  if (n_orig <= 0 || n_new <= 0 || n_new > n_orig)
    throw InvalidParamsError("scaling factor requires 1 <= n_new <= n_orig");
  return std::pow(static_cast<double>(n_new) / n_orig, efficiency_exponent);
}

int ScalingModel::min_nodes_for(double min_factor, int n_orig) const {
  for (int n = 1; n <= n_orig; ++n)
    if (factor(n, n_orig) + 1e-12 >= min_factor) return n;
  return n_orig;
}

double job_power(const JobState& state, const ClusterSpec& cluster) {
  const double gpus = static_cast<double>(state.nodes) * cluster.gpus_per_node;
  if (state.status == JobStatus::Paused) return gpus * cluster.gpu_idle_watts;
  const double cap = std::min(state.cap_watts, cluster.gpu_tdp_watts);
  return gpus * cap * state.spec.utilization;
}

double job_throughput(const JobState& state, const ResponseCurve& curve,
                      const ScalingModel& scaling, const ClusterSpec& cluster) {
  if (state.status == JobStatus::Paused) return 0.0;
  const double frac = std::min(state.cap_watts, cluster.gpu_tdp_watts) / cluster.gpu_tdp_watts;
  return curve.value_at(frac) * scaling.factor(state.nodes, state.spec.nodes);
}

PowerPrediction predict_cluster(const std::vector<JobState>& states,
                                const CurveLibrary& curves,
                                const ScalingModel& scaling,
                                const ClusterSpec& cluster) {
  PowerPrediction out;
  double occupied_nodes = 0.0;
  for (const auto& st : states) {
    const double watts = job_power(st, cluster);
    const double thr = job_throughput(st, curves.at(st.spec.curve_class), scaling, cluster);
    out.per_job_watts[st.spec.id] = watts;
    out.per_job_throughput[st.spec.id] = thr;
    out.cluster_watts += watts;
    occupied_nodes += st.nodes;
  }
  out.cluster_watts += occupied_nodes * cluster.node_overhead_watts;
  return out;
}

}  // namespace gridflex
