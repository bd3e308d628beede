#include "demix/binning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace demix {

GroupedSample::GroupedSample(Matrix points, std::vector<Index> group_sizes)
    : points_(std::move(points)), sizes_(std::move(group_sizes)) {
  if (sizes_.empty()) fail(ErrorKind::input, "grouped sample: at least one group is required");
  if (points_.cols() < 1) fail(ErrorKind::input, "grouped sample: dimension must be positive");
  offsets_.reserve(sizes_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] < 1) {
      fail(ErrorKind::input, "grouped sample: group " + std::to_string(i) + " is empty");
    }
    offsets_.push_back(offsets_.back() + sizes_[i]);
  }
  if (offsets_.back() != points_.rows()) {
    fail(ErrorKind::input, "grouped sample: group sizes do not add up to the number of points");
  }
  if (!points_.allFinite()) fail(ErrorKind::input, "grouped sample: non-finite coordinate");
  owner_.resize(static_cast<std::size_t>(points_.rows()));
  for (std::size_t i = 0; i < sizes_.size(); ++i)
    std::fill(owner_.begin() + offsets_[i], owner_.begin() + offsets_[i + 1], static_cast<Index>(i));
}

GroupedSample GroupedSample::from_groups(const std::vector<Matrix>& groups) {
  if (groups.empty()) fail(ErrorKind::input, "grouped sample: at least one group is required");
  const Index d = groups.front().cols();
  Index total = 0;
  std::vector<Index> sizes;
  for (const auto& g : groups) {
    if (g.cols() != d) fail(ErrorKind::input, "grouped sample: groups disagree on dimension");
    sizes.push_back(g.rows());
    total += g.rows();
  }
  Matrix points(total, d);
  Index row = 0;
  for (const auto& g : groups) {
    points.middleRows(row, g.rows()) = g;
    row += g.rows();
  }
  return GroupedSample(std::move(points), std::move(sizes));
}

Index GroupedSample::min_group_size() const {
  return *std::min_element(sizes_.begin(), sizes_.end());
}

Vector GroupedSample::sizes() const {
  Vector out(group_count());
  for (Index i = 0; i < group_count(); ++i) out[i] = static_cast<double>(group_size(i));
  return out;
}

GroupedSample GroupedSample::without_point(Index i, Index j) const {
  if (i < 0 || i >= group_count() || j < 0 || j >= group_size(i)) {
    fail(ErrorKind::input, "without_point: index out of range");
  }
  if (group_size(i) < 2) fail(ErrorKind::input, "without_point: group would become empty");
  const Index removed = group_begin(i) + j;
  Matrix reduced(total_points() - 1, dimension());
  reduced.topRows(removed) = points_.topRows(removed);
  reduced.bottomRows(total_points() - removed - 1) = points_.bottomRows(total_points() - removed - 1);
  auto sizes = sizes_;
  sizes[static_cast<std::size_t>(i)] -= 1;
  return GroupedSample(std::move(reduced), std::move(sizes));
}

BinPartition BinPartition::whole_space(Index dimension) {
  if (dimension < 1) fail(ErrorKind::config, "partition: dimension must be positive");
  BinPartition p;
  p.dimension_ = dimension;
  p.bin_count_ = 1;
  if (dimension > 1) p.nodes_.push_back(Node{-1, 0.0, -1, -1, 0});
  return p;
}

BinPartition BinPartition::from_breakpoints(std::vector<double> breakpoints) {
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) {
    fail(ErrorKind::binning, "partition: breakpoints must be sorted");
  }
  BinPartition p;
  p.dimension_ = 1;
  p.bin_count_ = static_cast<Index>(breakpoints.size()) + 1;
  p.breakpoints_ = std::move(breakpoints);
  return p;
}

BinPartition BinPartition::from_tree(Index dimension, std::vector<Node> nodes) {
  if (nodes.empty()) fail(ErrorKind::binning, "partition: empty split tree");
  BinPartition p;
  p.dimension_ = dimension;
  Index leaves = 0;
  for (const auto& n : nodes) {
    if (n.axis < 0) {
      if (n.leaf != leaves) fail(ErrorKind::binning, "partition: leaves must be numbered in order");
      ++leaves;
    } else if (n.axis >= dimension || n.left < 0 || n.right < 0 ||
               n.left >= static_cast<Index>(nodes.size()) ||
               n.right >= static_cast<Index>(nodes.size())) {
      fail(ErrorKind::binning, "partition: malformed split node");
    }
  }
  p.bin_count_ = leaves;
  p.nodes_ = std::move(nodes);
  return p;
}

Index BinPartition::interval_index(double x) const {
  // Number of breakpoints strictly below x; intervals are right-closed.
  return static_cast<Index>(std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                            breakpoints_.begin());
}

Index default_bin_count(Index topics, double points_per_group, Index groups) {
  if (topics < 1 || groups < 1 || !(points_per_group >= 1.0)) {
    fail(ErrorKind::config, "bin count: K, N and n must be at least 1");
  }
  const double raw = std::floor(static_cast<double>(topics) *
                                std::log(points_per_group * static_cast<double>(groups)));
  if (!std::isfinite(raw) || raw > 1e15) fail(ErrorKind::config, "bin count: overflow");
  return std::max<Index>(2 * static_cast<Index>(raw), topics);
}

BinPartition build_quantile_bins(std::span<const double> pooled, Index bins) {
  if (bins < 1) fail(ErrorKind::config, "quantile bins: M must be at least 1");
  std::vector<double> sorted(pooled.begin(), pooled.end());
  std::sort(sorted.begin(), sorted.end());
  Index distinct_count = sorted.empty() ? 0 : 1;
  for (std::size_t p = 1; p < sorted.size(); ++p)
    if (sorted[p] != sorted[p - 1]) ++distinct_count;
  if (distinct_count < bins) {
    fail(ErrorKind::binning, "quantile bins: only " + std::to_string(distinct_count) +
                                 " distinct values for M=" + std::to_string(bins) +
                                 "; reduce the bin count");
  }
  const auto total = static_cast<Index>(sorted.size());
  std::vector<double> breakpoints;
  breakpoints.reserve(static_cast<std::size_t>(bins - 1));
  for (Index m = 1; m < bins; ++m) {
    const Index rank = (m * total + bins - 1) / bins;  // ceil(m P / M), 1-based
    breakpoints.push_back(sorted[static_cast<std::size_t>(rank - 1)]);
  }
  return BinPartition::from_breakpoints(std::move(breakpoints));
}

namespace {

struct TreeBuilder {
  const Matrix& pooled;
  std::vector<BinPartition::Node> nodes;
  Index next_leaf = 0;

  Index build(std::vector<Index> members, Index leaves) {
    const auto id = static_cast<Index>(nodes.size());
    nodes.emplace_back();
    if (leaves == 1) {
      nodes[static_cast<std::size_t>(id)].leaf = next_leaf++;
      return id;
    }

    Index axis = -1;
    double widest = 0.0;
    for (Index a = 0; a < pooled.cols(); ++a) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (Index p : members) {
        lo = std::min(lo, pooled(p, a));
        hi = std::max(hi, pooled(p, a));
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = a;
      }
    }
    if (axis < 0) {
      fail(ErrorKind::binning, "split tree: a cell needing " + std::to_string(leaves) +
                                   " leaves holds only identical points; reduce the bin count");
    }

    std::vector<double> values;
    values.reserve(members.size());
    for (Index p : members) values.push_back(pooled(p, axis));
    std::sort(values.begin(), values.end());

    const Index left_leaves = leaves / 2;
    const auto count = static_cast<Index>(members.size());
    const Index left_count = std::max<Index>(1, (count * left_leaves + leaves - 1) / leaves);
    double threshold = values[static_cast<std::size_t>(left_count - 1)];
    if (threshold >= values.back()) {
      threshold = *(std::lower_bound(values.begin(), values.end(), values.back()) - 1);
    }

    std::vector<Index> left, right;
    for (Index p : members) (pooled(p, axis) <= threshold ? left : right).push_back(p);
    members.clear();
    members.shrink_to_fit();

    nodes[static_cast<std::size_t>(id)].axis = axis;
    nodes[static_cast<std::size_t>(id)].threshold = threshold;
    const Index l = build(std::move(left), left_leaves);
    const Index r = build(std::move(right), leaves - left_leaves);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

}  // namespace

BinPartition build_equal_count_tree(const Matrix& pooled, Index bins) {
  if (bins < 1) fail(ErrorKind::config, "split tree: M must be at least 1");
  if (pooled.cols() < 1) fail(ErrorKind::input, "split tree: dimension must be positive");
  if (pooled.rows() < bins) {
    fail(ErrorKind::binning, "split tree: " + std::to_string(pooled.rows()) +
                                 " points cannot fill M=" + std::to_string(bins) + " cells");
  }
  if (bins == 1) return BinPartition::whole_space(pooled.cols());
  std::vector<Index> all(static_cast<std::size_t>(pooled.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  TreeBuilder builder{pooled, {}, 0};
  builder.build(std::move(all), bins);
  return BinPartition::from_tree(pooled.cols(), std::move(builder.nodes));
}

BinPartition build_bins(const GroupedSample& samples, Index bins) {
  if (samples.dimension() == 1) {
    const Matrix& pts = samples.points();
    return build_quantile_bins(std::span<const double>(pts.data(), static_cast<std::size_t>(pts.rows())), bins);
  }
  return build_equal_count_tree(samples.points(), bins);
}

std::vector<Index> assign_bins(const BinPartition& partition, const Matrix& points) {
  if (points.cols() != partition.dimension()) fail(ErrorKind::input, "assign_bins: dimension mismatch");
  std::vector<Index> out(static_cast<std::size_t>(points.rows()));
  for (Index p = 0; p < points.rows(); ++p) out[static_cast<std::size_t>(p)] = partition.bin_index(points.row(p));
  return out;
}

HistogramMatrix histogram(const GroupedSample& samples, const BinPartition& partition) {
  return histogram(samples, partition, assign_bins(partition, samples.points()));
}

HistogramMatrix histogram(const GroupedSample& samples, const BinPartition& partition,
                          const std::vector<Index>& assignment) {
  HistogramMatrix hist{Eigen::MatrixXi::Zero(partition.bin_count(), samples.group_count())};
  for (Index p = 0; p < samples.total_points(); ++p)
    hist.counts(assignment[static_cast<std::size_t>(p)], samples.group_of(p)) += 1;
  return hist;
}

}  // namespace demix
