#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridflex/types.hpp"

namespace gridflex {

/// One point of a power/throughput profile: normalized throughput observed
/// at a given per-GPU power fraction (cap / TDP).
struct CurveSample {
  double power_fraction = 0.0;
  double norm_throughput = 0.0;
};

/// Piecewise-linear monotone map from power fraction to normalized
/// throughput. Knots are sorted, power fractions lie in (0, 1], throughput
/// is non-decreasing, strictly positive, and exactly 1 at full power.
class ResponseCurve {
 public:
  ResponseCurve() = default;
  ResponseCurve(std::string class_id, std::vector<CurveSample> knots);

  const std::string& class_id() const { return class_id_; }
  const std::vector<CurveSample>& knots() const { return knots_; }
  double min_power_fraction() const { return knots_.front().power_fraction; }

  /// Linear interpolation, clamped to [first knot, 1].
  double value_at(double power_fraction) const;

  /// Smallest power fraction whose throughput reaches `norm_throughput`
  /// (clamped to the curve's range). Inverse of value_at up to flats.
  double invert(double norm_throughput) const;

  /// Deepest throughput reduction a cap alone can express on this curve.
  double max_cap_slowdown() const { return 1.0 - knots_.front().norm_throughput; }

 private:
  std::string class_id_;
  std::vector<CurveSample> knots_;
};

/// Least-squares isotonic (non-decreasing) fit via pool-adjacent-violators.
/// `weights` defaults to all ones; sizes must match.
std::vector<double> isotonic_fit(const std::vector<double>& values,
                                 const std::vector<double>& weights = {});

/// Fits a monotone response curve to profile samples: sorts by power
/// fraction, pools duplicate fractions, runs an isotonic fit and pins
/// throughput at full power to exactly 1. Throws InsufficientSamplesError
/// (< 2 distinct fractions, or no sample at full power) and
/// NonPositiveThroughputError.
ResponseCurve fit_curve(std::string class_id, std::vector<CurveSample> samples);

/// Profile CSV with header `power_fraction,norm_throughput`.
std::vector<CurveSample> load_profile_csv(const std::filesystem::path& path);

class CurveLibrary {
 public:
  /// Three synthetic workload classes: "pretrain", "finetune", "inference".
  /// Pretraining is the most cap-sensitive in the mid range; all classes
  /// degrade only modestly near full power.
  static CurveLibrary defaults();

  static CurveLibrary parse_json_text(const std::string& text);
  static CurveLibrary load(const std::filesystem::path& path);
  std::string to_json_text() const;

  void add(ResponseCurve curve);
  bool contains(const std::string& class_id) const;
  const ResponseCurve& at(const std::string& class_id) const;
  std::set<std::string> class_ids() const;

 private:
  std::map<std::string, ResponseCurve> curves_;
};

/// Throughput scaling when a job runs on fewer nodes than requested:
/// (n_new / n_orig) ^ efficiency_exponent.
struct ScalingModel {
  double efficiency_exponent = 0.9;

  double factor(int n_new, int n_orig) const;
  /// Smallest node count whose scaling factor stays >= min_factor.
  int min_nodes_for(double min_factor, int n_orig) const;
};

/// Predicted electrical power of one job in its current state.
/// Running jobs draw nodes * gpus/node * min(cap, TDP) * utilization;
/// paused jobs idle at nodes * gpus/node * gpu_idle_watts.
double job_power(const JobState& state, const ClusterSpec& cluster);

/// Normalized throughput of one job in its current state (0 when paused,
/// curve(cap/TDP) * scaling(nodes) when running).
double job_throughput(const JobState& state, const ResponseCurve& curve,
                      const ScalingModel& scaling, const ClusterSpec& cluster);

struct PowerPrediction {
  double cluster_watts = 0.0;
  std::map<std::string, double> per_job_watts;
  std::map<std::string, double> per_job_throughput;
};

/// Independent per-job summation plus per-occupied-node overhead.
PowerPrediction predict_cluster(const std::vector<JobState>& states,
                                const CurveLibrary& curves,
                                const ScalingModel& scaling,
                                const ClusterSpec& cluster);

}  // namespace gridflex
