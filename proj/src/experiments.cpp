#include "demix/experiments.hpp"

#include "demix/bandwidth.hpp"
#include "demix/binning.hpp"
#include "demix/estimator.hpp"
#include "demix/parallel.hpp"
#include "demix/topic_score.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>

namespace demix {

KernelSpec experiment_kernel(const ExperimentConfig& config) {
  return config.kernel_order <= 1 ? KernelSpec::gaussian(1.0) : KernelSpec::higher_order(config.kernel_order, 1.0);
}

Replicate simulate_replicate(const BumpDensities& densities, Index groups, Index points_per_group, double tau,
                             std::uint64_t seed) {
  Replicate out;
  out.memberships = sample_memberships(groups, densities.component_count(), tau, derive_seed(seed, 1));
  out.sample = sample_dataset(out.memberships, densities, points_per_group, derive_seed(seed, 2));
  out.seed = seed;
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.standard_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return out;
}

namespace {

void validate(const ExperimentConfig& config) {
  if (config.reps < 1) fail(ErrorKind::config, "experiment: reps must be at least 1");
  if (config.N < 3) fail(ErrorKind::config, "experiment: N must be at least 3");
  if (config.n < 1 || config.K < 1) fail(ErrorKind::config, "experiment: n and K must be positive");
  if (!(config.beta > 0.0) || !(config.tau > 0.0)) fail(ErrorKind::config, "experiment: beta and tau must be positive");
  if (config.eval_points < 2) fail(ErrorKind::config, "experiment: eval_points must be at least 2");
}

Matrix as_column(const Vector& v) { return Matrix(v); }

ReplicationResult score(const BumpDensities& densities, const WeightedDensityEstimate& estimate,
                        const ExperimentConfig& config) {
  const double bound = densities.support_bound();
  const Vector grid = linspace(-bound, bound, config.eval_points);
  const Matrix values = estimate.evaluate_on_grid(as_column(grid));
  const Matrix truth = densities.evaluate(grid);
  const std::vector<Index> perm = align_components(values, truth, grid);
  ReplicationResult out;
  out.ise.resize(truth.rows());
  for (Index k = 0; k < truth.rows(); ++k)
    out.ise[k] = ise(values.row(perm[static_cast<std::size_t>(k)]).transpose(), truth.row(k).transpose(), grid);
  out.mise = out.ise.mean();
  return out;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t setting, Index rep) {
  return derive_seed(derive_seed(seed, setting), static_cast<std::uint64_t>(rep));
}

const BumpDensities& densities_for(std::map<Index, std::unique_ptr<BumpDensities>>& cache, Index k,
                                   const ExperimentConfig& config) {
  auto& slot = cache[k];
  if (!slot) slot = std::make_unique<BumpDensities>(k, config.beta, config.cdf_knots);
  return *slot;
}

}  // namespace

ReplicationResult run_pipeline(const BumpDensities& densities, const Replicate& replicate, Index topics,
                               const ExperimentConfig& config, double fixed_bandwidth, Index fixed_bins) {
  const GroupedSample& sample = replicate.sample;
  const double mean_size = static_cast<double>(sample.total_points()) / static_cast<double>(sample.group_count());
  const Index bins = fixed_bins > 0 ? fixed_bins : default_bin_count(topics, mean_size, sample.group_count());
  const BinPartition partition = build_bins(sample, bins);
  const Matrix topic_matrix = topic_score(histogram(sample, partition), topics);
  const KernelSpec family = experiment_kernel(config);

  double bandwidth = fixed_bandwidth;
  if (!(bandwidth > 0.0)) {
    const BandwidthGrid grid = make_default_grid(topics, mean_size, sample.group_count(), config.bandwidth_grid);
    CvOptions options;
    options.subsample = config.subsample;
    options.seed = derive_seed(replicate.seed, 3);
    options.quadrature_points = config.quadrature_points;
    options.ridge = config.ridge;
    bandwidth = select_bandwidth(sample, partition, topic_matrix, grid, options, family).bandwidth;
  }
  const DemixFit fit =
      build_demix_estimator(sample, partition, topic_matrix, family.with_bandwidth(bandwidth), config.ridge);
  ReplicationResult out = score(densities, fit.estimate, config);
  out.bandwidth = bandwidth;
  out.bins = bins;
  return out;
}

std::vector<Setting> experiment1_settings(const ExperimentConfig& config) {
  return {
      {config.n, config.N, config.K},
      {config.n, config.N, 2 * config.K},
      {config.n, std::max<Index>(config.N / 10, 3), config.K},
      {std::max<Index>(config.n / 10, 1), config.N, config.K},
  };
}

Experiment1Result run_experiment1(const ExperimentConfig& config) {
  return run_experiment1(config, experiment1_settings(config));
}

Experiment1Result run_experiment1(const ExperimentConfig& config, const std::vector<Setting>& settings) {
  validate(config);
  std::map<Index, std::unique_ptr<BumpDensities>> cache;
  for (const auto& s : settings) densities_for(cache, s.K, config);

  Experiment1Result out;
  out.settings.resize(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) {
    out.settings[s].setting = settings[s];
    out.settings[s].replications.resize(static_cast<std::size_t>(config.reps));
  }
  const auto tasks = static_cast<Index>(settings.size()) * config.reps;
  parallel_for(tasks, [&](Index task) {
    const auto s = static_cast<std::size_t>(task / config.reps);
    const Index rep = task % config.reps;
    const Setting& setting = settings[s];
    const BumpDensities& densities = *cache.at(setting.K);
    try {
      const Replicate replicate =
          simulate_replicate(densities, setting.n, setting.N, config.tau, replicate_seed(config.seed, s, rep));
      ReplicationResult result = run_pipeline(densities, replicate, setting.K, config);
      result.rep = rep;
      out.settings[s].replications[static_cast<std::size_t>(rep)] = std::move(result);
    } catch (const Error& e) {
      throw Error(e.kind(), "setting (n=" + std::to_string(setting.n) + ", N=" + std::to_string(setting.N) +
                                ", K=" + std::to_string(setting.K) + ") rep " + std::to_string(rep) + ": " + e.what());
    }
  });
  for (auto& s : out.settings) {
    std::vector<double> mise;
    for (const auto& r : s.replications) mise.push_back(r.mise);
    s.mise = summarize(mise);
  }
  return out;
}

Experiment2Result run_experiment2(const ExperimentConfig& config, double fixed_bandwidth, Index bin_points) {
  validate(config);
  if (bin_points < 2) fail(ErrorKind::config, "experiment 2: need at least 2 bin-count points");
  const BumpDensities densities(config.K, config.beta, config.cdf_knots);
  const KernelSpec family = experiment_kernel(config);
  const double nn = static_cast<double>(config.N) * static_cast<double>(config.n);

  Experiment2Result out;
  out.bins_for_bandwidth_sweep = default_bin_count(config.K, static_cast<double>(config.N), config.n);
  out.bandwidth_for_bin_sweep = fixed_bandwidth;

  const BandwidthGrid grid = make_default_grid(config.K, static_cast<double>(config.N), config.n, config.bandwidth_grid);
  const Vector bandwidths = grid.bandwidths();
  out.bandwidth_sweep.resize(static_cast<std::size_t>(grid.size()));
  for (Index l = 0; l < grid.size(); ++l) {
    auto& point = out.bandwidth_sweep[static_cast<std::size_t>(l)];
    point.exponent = grid.exponents[l];
    point.value = bandwidths[l];
    point.mise.resize(static_cast<std::size_t>(config.reps));
  }

  const auto base_bins = static_cast<double>(static_cast<Index>(std::floor(static_cast<double>(config.K) * std::log(nn))));
  const Vector exponents = linspace(-0.2, 0.8, bin_points);
  out.bin_sweep.resize(static_cast<std::size_t>(bin_points));
  for (Index b = 0; b < bin_points; ++b) {
    auto& point = out.bin_sweep[static_cast<std::size_t>(b)];
    point.exponent = exponents[b];
    point.value = static_cast<double>(
        std::max<Index>(config.K, static_cast<Index>(std::llround(base_bins * std::pow(10.0, exponents[b])))));
    point.mise.resize(static_cast<std::size_t>(config.reps));
  }

  parallel_for(config.reps, [&](Index rep) {
    const Replicate replicate =
        simulate_replicate(densities, config.n, config.N, config.tau, replicate_seed(config.seed, 0, rep));
    const BinPartition partition = build_bins(replicate.sample, out.bins_for_bandwidth_sweep);
    const Matrix topics = topic_score(histogram(replicate.sample, partition), config.K);
    for (Index l = 0; l < grid.size(); ++l) {
      const DemixFit fit =
          build_demix_estimator(replicate.sample, partition, topics, family.with_bandwidth(bandwidths[l]), config.ridge);
      out.bandwidth_sweep[static_cast<std::size_t>(l)].mise[static_cast<std::size_t>(rep)] =
          score(densities, fit.estimate, config).mise;
    }
    for (auto& point : out.bin_sweep) {
      point.mise[static_cast<std::size_t>(rep)] =
          run_pipeline(densities, replicate, config.K, config, fixed_bandwidth, static_cast<Index>(point.value)).mise;
    }
  });

  for (auto& p : out.bandwidth_sweep) p.summary = summarize(p.mise);
  for (auto& p : out.bin_sweep) p.summary = summarize(p.mise);
  return out;
}

SlopeFit fit_log_slope(const std::vector<double>& x, const std::vector<Summary>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::config, "slope fit: need at least two points");
  const auto count = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  std::vector<double> lx, ly;
  for (std::size_t s = 0; s < x.size(); ++s) {
    if (!(x[s] > 0.0) || !(y[s].mean > 0.0)) fail(ErrorKind::numeric, "slope fit: non-positive value");
    lx.push_back(std::log(x[s]));
    ly.push_back(std::log(y[s].mean));
    mx += lx.back();
    my += ly.back();
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    sxx += (lx[s] - mx) * (lx[s] - mx);
    sxy += (lx[s] - mx) * (ly[s] - my);
  }
  SlopeFit out;
  out.slope = sxy / sxx;
  double variance = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    const double c = (lx[s] - mx) / sxx;
    const double rel = y[s].standard_error / y[s].mean;
    variance += c * c * rel * rel;
  }
  out.standard_error = std::sqrt(variance);
  out.ci_low = out.slope - 1.96 * out.standard_error;
  out.ci_high = out.slope + 1.96 * out.standard_error;
  return out;
}

std::vector<Setting> rate_settings() { return {{50, 20, 3}, {100, 40, 3}, {200, 80, 3}}; }

RateResult run_rate_study(const ExperimentConfig& config) { return run_rate_study(config, rate_settings()); }

RateResult run_rate_study(const ExperimentConfig& config, const std::vector<Setting>& settings) {
  validate(config);
  if (settings.size() < 3) fail(ErrorKind::config, "rate study: need at least 3 sample sizes");
  std::map<Index, std::unique_ptr<BumpDensities>> cache;
  for (const auto& s : settings) densities_for(cache, s.K, config);
  const KernelSpec family = experiment_kernel(config);

  RateResult out;
  out.rows.resize(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) {
    auto& row = out.rows[s];
    row.setting = settings[s];
    row.sample_size = static_cast<double>(settings[s].n) * static_cast<double>(settings[s].N);
    row.bandwidth = std::pow(static_cast<double>(settings[s].K) / row.sample_size, 1.0 / (2.0 * config.beta + 1.0));
    row.mise.resize(static_cast<std::size_t>(config.reps));
    row.oracle_mise.resize(static_cast<std::size_t>(config.reps));
  }

  const auto tasks = static_cast<Index>(settings.size()) * config.reps;
  parallel_for(tasks, [&](Index task) {
    const auto s = static_cast<std::size_t>(task / config.reps);
    const Index rep = task % config.reps;
    auto& row = out.rows[s];
    const BumpDensities& densities = *cache.at(row.setting.K);
    const Replicate replicate = simulate_replicate(densities, row.setting.n, row.setting.N, config.tau,
                                                   replicate_seed(config.seed, s, rep));
    row.mise[static_cast<std::size_t>(rep)] =
        run_pipeline(densities, replicate, row.setting.K, config, row.bandwidth).mise;
    const WeightedDensityEstimate oracle =
        oracle_estimator(replicate.sample, replicate.memberships, family.with_bandwidth(row.bandwidth));
    row.oracle_mise[static_cast<std::size_t>(rep)] = score(densities, oracle, config).mise;
  });

  std::vector<double> sizes;
  std::vector<Summary> demix, oracle;
  for (auto& row : out.rows) {
    row.summary = summarize(row.mise);
    row.oracle_summary = summarize(row.oracle_mise);
    sizes.push_back(row.sample_size);
    demix.push_back(row.summary);
    oracle.push_back(row.oracle_summary);
  }
  out.slope = fit_log_slope(sizes, demix);
  out.oracle_slope = fit_log_slope(sizes, oracle);
  return out;
}

}  // namespace demix
