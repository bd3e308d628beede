#include "doctest.h"

#include "demix/binning.hpp"
#include "demix/estimator.hpp"
#include "demix/random.hpp"
#include "demix/topic_score.hpp"

#include <cmath>
#include <vector>

using namespace demix;

namespace {

// Three groups drawn from shifted normals, sizes 7, 9, 12.
GroupedSample small_sample(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<Index> sizes{7, 9, 12};
  Matrix pts(28, 1);
  Index r = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    for (Index j = 0; j < sizes[i]; ++j) pts(r++, 0) = rng.normal() + static_cast<double>(i);
  return GroupedSample(pts, sizes);
}

Matrix stochastic(Index m, Index k, Rng& rng) {
  Matrix g(m, k);
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < k; ++c) g(r, c) = rng.uniform() + (r % k == c ? 1.0 : 0.05);
  for (Index c = 0; c < k; ++c) g.col(c) /= g.col(c).sum();
  return g;
}

Index bin_of(const BinPartition& p, const GroupedSample& s, Index i, Index j) { return p.bin_index(s.point(i, j)); }

// S(x) straight from the double sum over ordered pairs j != j'.
Matrix pair_sum_S(const GroupedSample& s, const BinPartition& p, const KernelSpec& kernel, const Vector& x) {
  Matrix out = Matrix::Zero(p.bin_count(), s.group_count());
  for (Index i = 0; i < s.group_count(); ++i) {
    const double n = static_cast<double>(s.group_size(i));
    for (Index j = 0; j < s.group_size(i); ++j)
      for (Index jj = 0; jj < s.group_size(i); ++jj) {
        if (j == jj) continue;
        out(bin_of(p, s, i, jj), i) += eval_scaled(kernel, x, s.point(i, j).transpose()) / (n * (n - 1.0));
      }
  }
  return out;
}

}  // namespace

TEST_CASE("co-occurrence matrix on a single group") {
  HistogramMatrix h{Eigen::MatrixXi(2, 1)};
  h.counts << 2, 1;
  const Matrix t = compute_T(h);
  CHECK(t(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(t(0, 1) == doctest::Approx(1.0 / 3));
  CHECK(t(1, 0) == doctest::Approx(1.0 / 3));
  CHECK(t(1, 1) == doctest::Approx(0.0));

  HistogramMatrix single{Eigen::MatrixXi(2, 1)};
  single.counts << 1, 0;
  try {
    compute_T(single);
    FAIL("expected an estimator error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::estimator);
  }
}

TEST_CASE("co-occurrence matrix matches the pair loop") {
  const GroupedSample s = small_sample(1);
  const BinPartition p = build_bins(s, 5);
  Matrix oracle = Matrix::Zero(5, 5);
  for (Index i = 0; i < s.group_count(); ++i) {
    const double n = static_cast<double>(s.group_size(i));
    for (Index j = 0; j < s.group_size(i); ++j)
      for (Index jj = 0; jj < s.group_size(i); ++jj)
        if (j != jj) oracle(bin_of(p, s, i, j), bin_of(p, s, i, jj)) += 1.0 / (n * (n - 1.0));
  }
  const Matrix t = compute_T(s, p);
  CHECK((t - oracle).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((t - t.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.sum() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK((t.array() >= 0.0).all());
}

TEST_CASE("pair weights and the kernel-weighted pair sum") {
  const GroupedSample s = small_sample(2);
  const BinPartition p = build_bins(s, 4);
  const PairWeightTensor w = compute_pair_weights(s, p);
  for (Index q = 0; q < s.total_points(); ++q) {
    const double n = static_cast<double>(s.group_size(s.group_of(q)));
    CHECK(w.weights.row(q).sum() == doctest::Approx(1.0 / n).epsilon(1e-12));
  }
  const KernelSpec kernel = KernelSpec::gaussian(0.6);
  for (double xv : {-1.0, 0.4, 2.5}) {
    Vector x(1);
    x << xv;
    const Matrix fast = compute_S(s, w, kernel, x);
    CHECK((fast - pair_sum_S(s, p, kernel, x)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("estimator agrees with the closed-form expression") {
  Rng rng(3);
  const GroupedSample s = small_sample(3);
  const BinPartition p = build_bins(s, 6);
  const Matrix g = stochastic(6, 2, rng);
  const KernelSpec kernel = KernelSpec::gaussian(0.5);
  for (Ridge ridge : {Ridge::rule, Ridge::none}) {
    const DemixFit fit = build_demix_estimator(s, p, g, kernel, ridge);
    Matrix inner = g.transpose() * compute_T(s, p) * g;
    inner.diagonal().array() += fit.regularization.epsilon;
    for (double xv : {-2.0, 0.0, 0.7, 3.1}) {
      Vector x(1);
      x << xv;
      const Vector direct =
          g.transpose() * g * inner.inverse() * g.transpose() * pair_sum_S(s, p, kernel, x) * Vector::Ones(3);
      CHECK((fit.estimate.evaluate(x) - direct).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("one uniform topic gives the average of the group KDEs") {
  const GroupedSample s = small_sample(4);
  const BinPartition p = build_bins(s, 5);
  const Matrix g = Matrix::Constant(5, 1, 0.2);
  const KernelSpec kernel = KernelSpec::gaussian(0.4);
  const DemixFit fit = build_demix_estimator(s, p, g, kernel);
  CHECK_FALSE(fit.regularization.fired());
  for (double xv : {-1.5, 0.2, 1.9}) {
    Vector x(1);
    x << xv;
    double average = 0.0;
    for (Index i = 0; i < 3; ++i) average += kde(Matrix(s.group(i)), kernel, x) / 3.0;
    CHECK(fit.estimate.evaluate(x)[0] == doctest::Approx(average).epsilon(1e-12));
  }
}

TEST_CASE("ridge rule fires on nearly collinear topics") {
  const GroupedSample s = small_sample(5);
  const BinPartition p = build_bins(s, 5);
  Matrix g(5, 2);
  g << 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2;
  g(0, 1) += 1e-6;
  g(1, 1) -= 1e-6;
  const DemixFit fit = build_demix_estimator(s, p, g, KernelSpec::gaussian(1.0));
  CHECK(fit.regularization.triggered);
  CHECK(fit.regularization.fired());
  CHECK(fit.regularization.epsilon == doctest::Approx(2.0 * 3.0 / 25.0));
  CHECK(fit.regularization.threshold == doctest::Approx(2.0 * 3.0 / 25.0 / std::pow(std::log(28.0), 2)));

  const DemixFit bare = build_demix_estimator(s, p, g, KernelSpec::gaussian(1.0), Ridge::none);
  CHECK(bare.regularization.triggered);
  CHECK_FALSE(bare.regularization.fired());

  const Regularization quiet = regularization_for(Matrix::Identity(2, 2), 2, 3, 5, 28.0);
  CHECK_FALSE(quiet.triggered);
  CHECK(quiet.epsilon == 0.0);
}

TEST_CASE("oracle estimator") {
  const GroupedSample s = small_sample(6);
  Matrix pi(3, 2);
  pi << 0.9, 0.1, 0.3, 0.7, 0.5, 0.5;
  const WeightedDensityEstimate oracle = oracle_estimator(s, pi, KernelSpec::gaussian(0.3));
  CHECK((oracle.total_weight() - Vector::Ones(2)).cwiseAbs().maxCoeff() <= 1e-12);

  // K = 1: plain average of the group KDEs.
  const WeightedDensityEstimate pooled = oracle_estimator(s, Matrix::Ones(3, 1), KernelSpec::gaussian(0.3));
  Vector x(1);
  x << 0.8;
  double average = 0.0;
  for (Index i = 0; i < 3; ++i) average += kde(Matrix(s.group(i)), KernelSpec::gaussian(0.3), x) / 3.0;
  CHECK(pooled.evaluate(x)[0] == doctest::Approx(average).epsilon(1e-12));

  // Pure groups: each component is its group's KDE.
  const WeightedDensityEstimate pure = oracle_estimator(s, Matrix::Identity(3, 3), KernelSpec::gaussian(0.3));
  for (Index k = 0; k < 3; ++k)
    CHECK(pure.evaluate(x)[k] == doctest::Approx(kde(Matrix(s.group(k)), KernelSpec::gaussian(0.3), x)).epsilon(1e-12));

  Matrix bad = pi;
  bad(0, 0) = 0.5;
  CHECK_THROWS_AS(oracle_estimator(s, bad, KernelSpec::gaussian(0.3)), Error);
}

TEST_CASE("plug-in estimator equals its closed form") {
  Rng rng(7);
  const GroupedSample s = small_sample(7);
  const BinPartition p = build_bins(s, 6);
  const Matrix g = stochastic(6, 2, rng);
  const KernelSpec kernel = KernelSpec::gaussian(0.5);
  const WeightedDensityEstimate plug = plugin_estimator(s, p, g, kernel);
  const HistogramMatrix h = histogram(s, p);
  const Matrix inner = g.transpose() * compute_plugin_T(h) * g;
  for (double xv : {-0.5, 1.0, 2.2}) {
    Vector x(1);
    x << xv;
    Matrix s_all = Matrix::Zero(6, 3);  // every ordered pair, j = j' included
    for (Index i = 0; i < 3; ++i) {
      const double n = static_cast<double>(s.group_size(i));
      s_all.col(i) = kde(Matrix(s.group(i)), kernel, x) * h.as_real().col(i) / n;
    }
    const Vector direct = g.transpose() * g * inner.inverse() * g.transpose() * s_all * Vector::Ones(3);
    CHECK((plug.evaluate(x) - direct).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("membership estimates") {
  Rng rng(9);
  const Matrix g = stochastic(8, 3, rng);
  Matrix pi(4, 3);
  pi << 0.2, 0.3, 0.5, 1, 0, 0, 0.6, 0.4, 0, 0.1, 0.1, 0.8;
  const Vector sizes = Vector::Constant(4, 50.0);
  const Matrix counts = g * pi.transpose() * 50.0;
  const Memberships m = estimate_memberships(counts, sizes, g);
  CHECK((m.raw - pi).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((m.projected - pi).cwiseAbs().maxCoeff() <= 1e-12);

  Matrix noisy = counts;
  noisy(0, 0) += 7.0;
  noisy(3, 2) += 3.0;
  const Memberships fit = estimate_memberships(noisy, sizes, g);
  for (Index i = 0; i < 4; ++i) {
    const Vector oracle = g.colPivHouseholderQr().solve(noisy.col(i) / 50.0);
    CHECK((fit.raw.row(i).transpose() - oracle).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((fit.projected.row(i).array() >= 0.0).all());
    CHECK(fit.projected.row(i).sum() == doctest::Approx(1.0));
  }

  const Memberships single = estimate_memberships(counts, sizes, Matrix::Constant(8, 1, 0.125));
  CHECK((single.projected.array() == 1.0).all());
}

TEST_CASE("simplex projection") {
  Vector v(3);
  v << 0.5, 0.3, 0.2;
  CHECK(project_to_simplex(v) == v);
  v << 2.0, 0.0, 0.0;
  CHECK((project_to_simplex(v) - Vector::Unit(3, 0)).norm() < 1e-15);
  v << 0.6, 0.6, -1.0;
  const Vector w = project_to_simplex(v);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK(w[2] == 0.0);
}

TEST_CASE("grid evaluation matches point evaluation and keeps caller order") {
  Rng rng(10);
  Matrix pts(30, 2);
  for (Index r = 0; r < 30; ++r) pts.row(r) << rng.normal(), rng.normal();
  Matrix weights(30, 2);
  for (Index r = 0; r < 30; ++r) weights.row(r) << rng.normal(), rng.uniform();
  Vector h(2);
  h << 0.5, 0.8;
  const WeightedDensityEstimate est(pts, weights, KernelSpec::gaussian(h));
  CHECK(est.points() == pts);
  CHECK(est.weights() == weights);
  Matrix grid(5, 2);
  grid << 0, 0, 1, -1, -2, 0.5, 0.3, 0.3, 4, 4;
  const Matrix values = est.evaluate_on_grid(grid);
  for (Index r = 0; r < grid.rows(); ++r) {
    const Vector x = grid.row(r).transpose();
    CHECK((values.col(r) - est.evaluate(x)).cwiseAbs().maxCoeff() <= 1e-14);
    Vector brute = Vector::Zero(2);
    for (Index q = 0; q < 30; ++q) brute += eval_scaled(est.kernel(), x, pts.row(q).transpose()) * weights.row(q).transpose();
    CHECK((values.col(r) - brute).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("topic matrix shape is checked") {
  const GroupedSample s = small_sample(11);
  const BinPartition p = build_bins(s, 5);
  CHECK_THROWS_AS(build_demix_estimator(s, p, Matrix::Constant(4, 1, 0.25), KernelSpec::gaussian(1.0)), Error);
}
