#pragma once

#include "demix/common.hpp"

#include <span>
#include <vector>

namespace demix {

/// n groups of d-variate points stored group after group as the rows of one
/// matrix.
class GroupedSample {
 public:
  GroupedSample() = default;
  GroupedSample(Matrix points, std::vector<Index> group_sizes);

  static GroupedSample from_groups(const std::vector<Matrix>& groups);

  Index group_count() const { return static_cast<Index>(sizes_.size()); }
  Index dimension() const { return points_.cols(); }
  Index total_points() const { return points_.rows(); }
  Index group_size(Index i) const { return sizes_[static_cast<std::size_t>(i)]; }
  Index group_begin(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  Index group_of(Index point) const { return owner_[static_cast<std::size_t>(point)]; }
  Index min_group_size() const;

  const Matrix& points() const { return points_; }
  auto group(Index i) const { return points_.middleRows(group_begin(i), group_size(i)); }
  auto point(Index i, Index j) const { return points_.row(group_begin(i) + j); }

  /// N_i as a vector.
  Vector sizes() const;

  /// Copy with point j of group i removed.
  GroupedSample without_point(Index i, Index j) const;

 private:
  Matrix points_;
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  std::vector<Index> owner_;
};

/// Disjoint cells covering R^d. In one dimension the cells are the intervals
/// (-inf, b_1], (b_1, b_2], ..., (b_{M-1}, inf). In higher dimensions they are
/// the leaves of an axis-aligned binary split tree, where a point goes left
/// when its coordinate is <= the node threshold. Cell indices are 0-based.
class BinPartition {
 public:
  struct Node {
    Index axis = -1;         // -1 marks a leaf
    double threshold = 0.0;
    Index left = -1;
    Index right = -1;
    Index leaf = -1;         // cell index for leaves
  };

  BinPartition() = default;

  static BinPartition whole_space(Index dimension);
  static BinPartition from_breakpoints(std::vector<double> breakpoints);
  static BinPartition from_tree(Index dimension, std::vector<Node> nodes);

  Index bin_count() const { return bin_count_; }
  Index dimension() const { return dimension_; }
  bool is_interval_partition() const { return dimension_ == 1 && nodes_.empty(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  template <typename Derived>
  Index bin_index(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dimension_) fail(ErrorKind::input, "bin_index: dimension mismatch");
    if (nodes_.empty()) return interval_index(x(0));
    Index node = 0;
    while (nodes_[static_cast<std::size_t>(node)].axis >= 0) {
      const Node& n = nodes_[static_cast<std::size_t>(node)];
      node = x(n.axis) <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(node)].leaf;
  }

  Index interval_index(double x) const;

 private:
  Index dimension_ = 1;
  Index bin_count_ = 1;
  std::vector<double> breakpoints_;
  std::vector<Node> nodes_;
};

/// M x n matrix of per-group bin counts; column i sums to N_i.
struct HistogramMatrix {
  Eigen::MatrixXi counts;

  Index bin_count() const { return counts.rows(); }
  Index group_count() const { return counts.cols(); }
  Vector sizes() const { return counts.cast<double>().colwise().sum().transpose(); }
  Matrix as_real() const { return counts.cast<double>(); }
};

/// 2 floor(K ln(N n)), never below K.
Index default_bin_count(Index topics, double points_per_group, Index groups);

/// Breakpoint m is the order statistic at (1-based) rank ceil(m P / M).
BinPartition build_quantile_bins(std::span<const double> pooled, Index bins);

/// Recursive equal-count splits on the coordinate of largest spread.
BinPartition build_equal_count_tree(const Matrix& pooled, Index bins);

/// Quantile bins for d = 1, split tree otherwise.
BinPartition build_bins(const GroupedSample& samples, Index bins);

/// Cell index of every point, in storage order.
std::vector<Index> assign_bins(const BinPartition& partition, const Matrix& points);

HistogramMatrix histogram(const GroupedSample& samples, const BinPartition& partition);
HistogramMatrix histogram(const GroupedSample& samples, const BinPartition& partition,
                          const std::vector<Index>& assignment);

}  // namespace demix
