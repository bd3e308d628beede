#include "doctest.h"

#include "demix/binning.hpp"
#include "demix/random.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace demix;

TEST_CASE("default bin count follows the logarithmic rule") {
  CHECK(default_bin_count(3, 100, 100) == 54);
  CHECK(default_bin_count(1, 1, 3) == 2);
  CHECK(default_bin_count(6, 100, 100) == 2 * static_cast<Index>(std::floor(6 * std::log(1e4))));
  CHECK(default_bin_count(6, 100, 100) == 110);
  CHECK(default_bin_count(5, 1, 1) == 5);  // floored at K
}

TEST_CASE("quantile bins on a tiny sample") {
  std::vector<double> pooled{4.0, 2.0, 1.0, 3.0};
  const BinPartition p = build_quantile_bins(pooled, 2);
  REQUIRE(p.bin_count() == 2);
  REQUIRE(p.breakpoints().size() == 1);
  CHECK(p.breakpoints()[0] == 2.0);
  Index first = 0;
  for (double x : pooled) first += p.interval_index(x) == 0;
  CHECK(first == 2);

  const BinPartition whole = build_quantile_bins(pooled, 1);
  CHECK(whole.bin_count() == 1);
  CHECK(whole.breakpoints().empty());
}

TEST_CASE("quantile bins are balanced on continuous data") {
  int balanced = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(11, seed));
    std::vector<double> pooled(1000);
    for (double& x : pooled) x = rng.uniform();
    const BinPartition p = build_quantile_bins(pooled, 10);
    std::vector<int> counts(10, 0);
    for (double x : pooled) ++counts[static_cast<std::size_t>(p.interval_index(x))];
    const bool ok = std::all_of(counts.begin(), counts.end(), [](int c) { return c >= 95 && c <= 105; });
    balanced += ok;
    // P divisible by M: exact balance up to ties.
    for (int c : counts) CHECK(std::abs(c - 100) <= 1);
  }
  CHECK(balanced >= 99);
}

TEST_CASE("too few distinct values is a binning error") {
  std::vector<double> pooled{1.0, 1.0, 1.0, 2.0};
  try {
    build_quantile_bins(pooled, 3);
    FAIL("expected a binning error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::binning);
  }
}

TEST_CASE("intervals are left-open and right-closed with unbounded ends") {
  const BinPartition p = BinPartition::from_breakpoints({0.0, 1.0});
  Vector x(1);
  x << 0.0;
  CHECK(p.bin_index(x) == 0);
  x << 1e-12;
  CHECK(p.bin_index(x) == 1);
  x << 1.0;
  CHECK(p.bin_index(x) == 1);
  x << -1e9;
  CHECK(p.bin_index(x) == 0);
  x << 1e9;
  CHECK(p.bin_index(x) == 2);
}

TEST_CASE("interval lookup agrees with a linear scan") {
  Rng rng(5);
  std::vector<double> breaks;
  for (int i = 0; i < 30; ++i) breaks.push_back(rng.normal());
  std::sort(breaks.begin(), breaks.end());
  const BinPartition p = BinPartition::from_breakpoints(breaks);
  for (int t = 0; t < 10000; ++t) {
    const double x = 3.0 * rng.normal();
    Index scan = 0;
    while (scan < static_cast<Index>(breaks.size()) && x > breaks[static_cast<std::size_t>(scan)]) ++scan;
    CHECK(p.interval_index(x) == scan);
  }
}

TEST_CASE("equal-count tree in two dimensions") {
  Matrix grid(8, 2);
  grid << 0, 0, 1, 0, 2, 0, 3, 0, 0, 1, 1, 1, 2, 1, 3, 1;
  const BinPartition p = build_equal_count_tree(grid, 4);
  REQUIRE(p.bin_count() == 4);
  std::vector<int> counts(4, 0);
  for (Index r = 0; r < grid.rows(); ++r) ++counts[static_cast<std::size_t>(p.bin_index(grid.row(r)))];
  for (int c : counts) CHECK(c == 2);

  CHECK(build_equal_count_tree(grid, 1).bin_count() == 1);

  Rng rng(9);
  Matrix uniform(4096, 2);
  for (Index r = 0; r < uniform.rows(); ++r) uniform.row(r) << rng.uniform(), rng.uniform();
  const BinPartition q = build_equal_count_tree(uniform, 16);
  std::vector<int> leaf(16, 0);
  for (Index r = 0; r < uniform.rows(); ++r) ++leaf[static_cast<std::size_t>(q.bin_index(uniform.row(r)))];
  const auto [lo, hi] = std::minmax_element(leaf.begin(), leaf.end());
  CHECK(static_cast<double>(*hi) / *lo <= 1.2);
  for (int c : leaf) CHECK(std::abs(c - 256) <= 4);  // ceil(log2 16)

  Matrix same = Matrix::Ones(10, 2);
  try {
    build_equal_count_tree(same, 2);
    FAIL("expected a binning error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::binning);
  }
}

TEST_CASE("histogram counts and conservation") {
  Matrix pts(2, 1);
  pts << -1.0, -2.0;
  const GroupedSample one(pts, {2});
  const BinPartition p = BinPartition::from_breakpoints({0.0});
  const HistogramMatrix h = histogram(one, p);
  CHECK(h.counts(0, 0) == 2);
  CHECK(h.counts(1, 0) == 0);

  Rng rng(3);
  Matrix many(150, 1);
  for (Index r = 0; r < 150; ++r) many(r, 0) = rng.normal();
  const GroupedSample three(many, {50, 50, 50});
  std::vector<double> breaks{-1.0, -0.2, 0.0, 0.5, 1.3};
  const BinPartition q = BinPartition::from_breakpoints(breaks);
  const HistogramMatrix hist = histogram(three, q);
  Eigen::MatrixXi oracle = Eigen::MatrixXi::Zero(6, 3);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 50; ++j) {
      const double x = three.point(i, j)(0);
      Index m = 0;
      while (m < 5 && x > breaks[static_cast<std::size_t>(m)]) ++m;
      ++oracle(m, i);
    }
  CHECK(hist.counts == oracle);
  for (Index i = 0; i < 3; ++i) CHECK(hist.counts.col(i).sum() == 50);

  // Permuting points within a group leaves the histogram unchanged.
  Matrix shuffled = many;
  std::reverse(shuffled.data(), shuffled.data() + 50);
  CHECK(histogram(GroupedSample(shuffled, {50, 50, 50}), q).counts == hist.counts);
}

TEST_CASE("tree partition covers every point and matches the histogram") {
  Rng rng(21);
  Matrix pts(100000, 2);
  for (Index r = 0; r < pts.rows(); ++r) pts.row(r) << rng.normal(), 3.0 * rng.normal();
  const BinPartition p = build_equal_count_tree(pts.topRows(2000), 8);
  const GroupedSample sample(pts, {50000, 50000});
  const std::vector<Index> bins = assign_bins(p, pts);
  Eigen::MatrixXi fused = Eigen::MatrixXi::Zero(8, 2);
  for (Index r = 0; r < pts.rows(); ++r) {
    REQUIRE(bins[static_cast<std::size_t>(r)] >= 0);
    REQUIRE(bins[static_cast<std::size_t>(r)] < 8);
    ++fused(bins[static_cast<std::size_t>(r)], r < 50000 ? 0 : 1);
  }
  CHECK(histogram(sample, p).counts == fused);
}

TEST_CASE("grouped sample bookkeeping") {
  Matrix pts(5, 1);
  pts << 1, 2, 3, 4, 5;
  const GroupedSample s(pts, {2, 3});
  CHECK(s.group_count() == 2);
  CHECK(s.group_begin(1) == 2);
  CHECK(s.group_of(4) == 1);
  CHECK(s.min_group_size() == 2);
  const GroupedSample r = s.without_point(1, 0);
  CHECK(r.total_points() == 4);
  CHECK(r.group_size(1) == 2);
  CHECK(r.point(1, 0)(0) == 4.0);
  CHECK_THROWS_AS(GroupedSample(pts, {2, 2}), Error);
}
