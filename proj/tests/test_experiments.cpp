#include "doctest.h"

#include "demix/bandwidth.hpp"
#include "demix/experiments.hpp"
#include "demix/random.hpp"
#include "demix/topic_score.hpp"

#include <cmath>

using namespace demix;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 30;
  c.N = 60;
  c.K = 2;
  c.reps = 2;
  c.bandwidth_grid = 6;
  c.subsample = 300;
  c.cdf_knots = 20000;
  return c;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t setting, Index rep) {
  return derive_seed(derive_seed(seed, setting), static_cast<std::uint64_t>(rep));
}

}  // namespace

TEST_CASE("summaries") {
  const Summary one = summarize({2.0});
  CHECK(one.mean == 2.0);
  CHECK(one.standard_error == 0.0);
  const Summary four = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(four.mean == 2.5);
  CHECK(four.standard_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("log-log slope fit") {
  std::vector<double> x{1e3, 4e3, 1.6e4};
  std::vector<Summary> y;
  for (double v : x) y.push_back({2.0 * std::pow(v, -0.8), 0.0});
  const SlopeFit exact = fit_log_slope(x, y);
  CHECK(exact.slope == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(exact.standard_error == doctest::Approx(0.0).epsilon(1e-12));

  // Relative errors of 10% on each mean; spacing is log(4).
  for (auto& s : y) s.standard_error = 0.1 * s.mean;
  const SlopeFit noisy = fit_log_slope(x, y);
  const double spread = 2.0 * std::pow(std::log(4.0), 2);
  CHECK(noisy.standard_error == doctest::Approx(0.1 / std::sqrt(spread)).epsilon(1e-9));
  CHECK(noisy.ci_low == doctest::Approx(noisy.slope - 1.96 * noisy.standard_error));
  CHECK(noisy.ci_high == doctest::Approx(noisy.slope + 1.96 * noisy.standard_error));
}

TEST_CASE("experiment settings") {
  ExperimentConfig c;
  const auto s = experiment1_settings(c);
  REQUIRE(s.size() == 4);
  CHECK((s[0].n == 100 && s[0].N == 100 && s[0].K == 3));
  CHECK((s[1].n == 100 && s[1].N == 100 && s[1].K == 6));
  CHECK((s[2].n == 100 && s[2].N == 10 && s[2].K == 3));
  CHECK((s[3].n == 10 && s[3].N == 100 && s[3].K == 3));
  const auto r = rate_settings();
  REQUIRE(r.size() == 3);
  CHECK(r[0].n * r[0].N == 1000);
  CHECK(r[1].n * r[1].N == 4000);
  CHECK(r[2].n * r[2].N == 16000);
}

TEST_CASE("one replication completes with finite error") {
  ExperimentConfig c = small_config();
  c.reps = 1;
  const Experiment1Result r = run_experiment1(c, {{c.n, c.N, c.K}});
  REQUIRE(r.settings.size() == 1);
  const ReplicationResult& rep = r.settings[0].replications[0];
  CHECK(std::isfinite(rep.mise));
  CHECK(rep.ise.size() == 2);
  CHECK(rep.mise == doctest::Approx(rep.ise.mean()));
  CHECK(rep.bins == default_bin_count(2, 60, 30));
}

TEST_CASE("doubling R halves the squared standard error") {
  // MISE has a heavy right tail, so a single sample SD is too noisy for a
  // 30% band. Average SE^2 over independent blocks of 40 replications and
  // compare the first 20 of each block with all 40.
  ExperimentConfig c = small_config();
  c.n = 50;
  c.N = 100;
  const BumpDensities densities(c.K, c.beta, c.cdf_knots);
  double se2_half = 0.0, se2_full = 0.0;
  for (std::uint64_t block = 0; block < 20; ++block) {
    std::vector<double> mise;
    for (Index rep = 0; rep < 40; ++rep) {
      const Replicate data = simulate_replicate(densities, c.n, c.N, c.tau, replicate_seed(c.seed, 100 + block, rep));
      mise.push_back(run_pipeline(densities, data, c.K, c, 0.4).mise);
    }
    se2_half += std::pow(summarize(std::vector<double>(mise.begin(), mise.begin() + 20)).standard_error, 2);
    se2_full += std::pow(summarize(mise).standard_error, 2);
  }
  const double ratio = se2_half / se2_full;
  CHECK(ratio >= 2.0 * 0.7);
  CHECK(ratio <= 2.0 * 1.3);
}

TEST_CASE("sweep points equal direct pipeline runs") {
  ExperimentConfig c = small_config();
  const Experiment2Result r = run_experiment2(c, 0.5, 3);
  const BumpDensities densities(c.K, c.beta, c.cdf_knots);
  for (Index rep = 0; rep < c.reps; ++rep) {
    const Replicate data = simulate_replicate(densities, c.n, c.N, c.tau, replicate_seed(c.seed, 0, rep));
    const auto& bins_point = r.bin_sweep[1];
    CHECK(bins_point.mise[static_cast<std::size_t>(rep)] ==
          run_pipeline(densities, data, c.K, c, 0.5, static_cast<Index>(bins_point.value)).mise);
    const auto& h_point = r.bandwidth_sweep[2];
    CHECK(h_point.mise[static_cast<std::size_t>(rep)] ==
          run_pipeline(densities, data, c.K, c, h_point.value, r.bins_for_bandwidth_sweep).mise);
  }
  CHECK(r.bin_sweep.front().value < r.bin_sweep.back().value);
}

TEST_CASE("evaluation grid error against a refined grid") {
  ExperimentConfig c = small_config();
  const BumpDensities densities(c.K, c.beta, c.cdf_knots);
  const Replicate data = simulate_replicate(densities, c.n, c.N, c.tau, 11);
  const DemixFit fit =
      build_demix_estimator(data.sample, build_bins(data.sample, 20),
                            topic_score(histogram(data.sample, build_bins(data.sample, 20)), 2),
                            KernelSpec::gaussian(0.5), Ridge::none);
  const double bound = densities.support_bound();
  for (Index k = 0; k < 2; ++k) {
    double values[2];
    Index nodes[2] = {400, 4000};
    for (int t = 0; t < 2; ++t) {
      const Vector grid = linspace(-bound, bound, nodes[t]);
      Matrix points(grid.size(), 1);
      points.col(0) = grid;
      const Matrix est = fit.estimate.evaluate_on_grid(points);
      values[t] = ise(est.row(k).transpose(), densities.evaluate(grid).row(k).transpose(), grid);
    }
    CHECK(std::abs(values[0] - values[1]) <= 2e-2 * values[1]);
  }
}

TEST_CASE("baseline bandwidth choice is interior and close to the theory rate") {
  ExperimentConfig c;
  const BumpDensities densities(3, 2.0, c.cdf_knots);
  BandwidthGrid grid = make_default_grid(3, 100, 100, 20);
  grid.exponents.conservativeResize(21);
  grid.exponents[20] = 0.2;  // (K/(N n))^{1/(2 beta + 1)} with beta = 2
  int interior = 0;
  for (Index rep = 0; rep < 20; ++rep) {
    const Replicate data = simulate_replicate(densities, 100, 100, c.tau, replicate_seed(c.seed, 0, rep));
    const BinPartition partition = build_bins(data.sample, default_bin_count(3, 100, 100));
    const Matrix topics = topic_score(histogram(data.sample, partition), 3);
    CvOptions options;
    options.seed = derive_seed(data.seed, 3);
    options.ridge = Ridge::none;
    const BandwidthSelection sel = select_bandwidth(data.sample, partition, topics, grid, options, KernelSpec::gaussian(1.0));
    Index best = 0;
    for (Index l = 1; l < 20; ++l)
      if (sel.scores[static_cast<std::size_t>(l)].amise < sel.scores[static_cast<std::size_t>(best)].amise) best = l;
    interior += best > 0 && best < 19;
    const double minimum = sel.scores[static_cast<std::size_t>(best)].amise;
    const double theory = sel.scores[20].amise;
    CHECK(std::abs(theory - minimum) <= 0.2 * std::abs(minimum));
  }
  CHECK(interior >= 18);
}

TEST_CASE("rate study slope is negative at R = 20") {
  ExperimentConfig c;
  c.reps = 20;
  const RateResult r = run_rate_study(c);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.slope.slope < 0.0);
  CHECK(r.oracle_slope.slope < 0.0);
  CHECK(r.rows[0].bandwidth == doctest::Approx(std::pow(3.0 / 1000.0, 0.2)));
}

TEST_CASE("invalid configurations") {
  ExperimentConfig c = small_config();
  c.reps = 0;
  CHECK_THROWS_AS(run_experiment1(c), Error);
  c = small_config();
  c.K = 3;
  c.n = 20;
  try {
    run_experiment1(c);  // n / 10 = 2 groups cannot carry 3 components
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("n=2") != std::string::npos);
  }
}
