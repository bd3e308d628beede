#pragma once

#include "demix/common.hpp"
#include "demix/estimator.hpp"
#include "demix/kernels.hpp"
#include "demix/simulation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace demix {

struct ExperimentConfig {
  Index n = 100;
  Index N = 100;
  Index K = 3;
  double beta = 2.0;
  double tau = 0.5;
  Index reps = 20;
  std::uint64_t seed = 1;
  Index bandwidth_grid = 20;     // L, exponents l / (L + 1)
  Index eval_points = 400;       // ISE grid over [-(a_K + 1), a_K + 1]
  Index quadrature_points = 400; // criterion's squared-norm integral
  Index subsample = 2000;        // leave-one-out cross term budget
  Index cdf_knots = 100000;
  int kernel_order = 1;          // 1 = Gaussian, otherwise polynomial x Gaussian
  Ridge ridge = Ridge::none;     // the simulations use the unmodified estimator
};

struct Setting {
  Index n;
  Index N;
  Index K;
};

/// Kernel implied by the configured order, with unit bandwidth.
KernelSpec experiment_kernel(const ExperimentConfig& config);

/// Memberships and samples of one replication; both streams derive from `seed`.
struct Replicate {
  Matrix memberships;
  GroupedSample sample;
  std::uint64_t seed = 0;  // also seeds the criterion's subsample
};

Replicate simulate_replicate(const BumpDensities& densities, Index groups, Index points_per_group, double tau,
                             std::uint64_t seed);

struct ReplicationResult {
  Index rep = 0;
  Vector ise;          // per true component, after alignment
  double mise = 0.0;   // mean of ise
  double bandwidth = 0.0;
  Index bins = 0;
};

struct Summary {
  double mean = 0.0;
  double standard_error = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct SettingResult {
  Setting setting;
  std::vector<ReplicationResult> replications;
  Summary mise;
};

/// Full pipeline on one replication: default bins, Topic-SCORE, bandwidth by
/// the leave-one-out criterion (or `fixed_bandwidth` when positive, or
/// `fixed_bins` when positive), estimator with the configured ridge, aligned ISE.
ReplicationResult run_pipeline(const BumpDensities& densities, const Replicate& replicate, Index topics,
                               const ExperimentConfig& config, double fixed_bandwidth = 0.0,
                               Index fixed_bins = 0);

std::vector<Setting> experiment1_settings(const ExperimentConfig& config);

struct Experiment1Result {
  std::vector<SettingResult> settings;
};

/// Settings (n,N,K) = baseline, K doubled, N / 10, n / 10.
Experiment1Result run_experiment1(const ExperimentConfig& config);
Experiment1Result run_experiment1(const ExperimentConfig& config, const std::vector<Setting>& settings);

struct SweepPoint {
  double exponent = 0.0;   // t of the sweep
  double value = 0.0;      // h or M
  std::vector<double> mise;  // per replication
  Summary summary;
};

struct Experiment2Result {
  Index bins_for_bandwidth_sweep = 0;
  double bandwidth_for_bin_sweep = 0.0;
  std::vector<SweepPoint> bandwidth_sweep;
  std::vector<SweepPoint> bin_sweep;
};

/// h sweep over the default exponent grid at M = 2 floor(K ln(N n)); M sweep
/// over M0 10^t, t in [-0.2, 0.8], at a fixed h. Replications share datasets
/// across sweep points.
Experiment2Result run_experiment2(const ExperimentConfig& config, double fixed_bandwidth = 0.31,
                                  Index bin_points = 10);

struct RateRow {
  Setting setting;
  double sample_size = 0.0;  // N n
  double bandwidth = 0.0;
  std::vector<double> mise;
  std::vector<double> oracle_mise;
  Summary summary;
  Summary oracle_summary;
};

struct SlopeFit {
  double slope = 0.0;
  double standard_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct RateResult {
  std::vector<RateRow> rows;
  SlopeFit slope;
  SlopeFit oracle_slope;
};

/// Least-squares slope of log(mean) on log(x) with a delta-method interval.
SlopeFit fit_log_slope(const std::vector<double>& x, const std::vector<Summary>& y);

std::vector<Setting> rate_settings();

/// Theory bandwidth (K/(N n))^{1/(2 beta + 1)} at each (n, N); both the
/// topic-weighted and the oracle estimator.
RateResult run_rate_study(const ExperimentConfig& config);
RateResult run_rate_study(const ExperimentConfig& config, const std::vector<Setting>& settings);

}  // namespace demix
