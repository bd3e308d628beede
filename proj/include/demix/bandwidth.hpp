#pragma once

#include "demix/binning.hpp"
#include "demix/common.hpp"
#include "demix/estimator.hpp"
#include "demix/kernels.hpp"

#include <cstdint>
#include <vector>

namespace demix {

/// Candidates h_l = base^{t_l} with base = K / (N n) and t_l = l / (L + 1).
struct BandwidthGrid {
  Vector exponents;
  double base = 0.0;

  Index size() const { return exponents.size(); }
  Vector bandwidths() const;
};

BandwidthGrid make_default_grid(Index topics, double points_per_group, Index groups, Index size = 20);

struct CvOptions {
  /// Points visited by the leave-one-out cross term; <= 0 or >= P means all.
  Index subsample = 2000;
  std::uint64_t seed = 0;
  /// Trapezoid nodes for the squared-norm integral (per axis when d > 1).
  Index quadrature_points = 400;
  /// Refit the topic matrix for every left-out point (tiny inputs only).
  bool refit_topics = false;
  /// Ridge policy of the estimator being tuned.
  Ridge ridge = Ridge::rule;
};

struct CvScore {
  double exponent = 0.0;
  double bandwidth = 0.0;
  double amise = 0.0;
  double quadratic = 0.0;
  double cross = 0.0;
  double seconds = 0.0;
};

/// Equally spaced nodes over [min - pad, max + pad] of every coordinate;
/// a tensor product grid when d > 1.
Matrix quadrature_grid(const GroupedSample& samples, double pad, Index points_per_axis);

/// Trapezoid rule on a tensor grid produced by quadrature_grid, applied to
/// sum_k values(k, g)^2.
double integrate_squared_norm(const Matrix& values, const Matrix& grid, Index points_per_axis);

/// T with point j of group i removed, by downdating group i's term.
Matrix leave_one_out_T(const GroupedSample& samples, const BinPartition& partition, Index i, Index j);

/// Pair weights of the reduced sample (P - 1 rows, storage order preserved).
PairWeightTensor leave_one_out_pair_weights(const GroupedSample& samples, const BinPartition& partition,
                                            Index i, Index j);

/// Y diag(1/N) of the reduced sample.
Matrix leave_one_out_normalized_counts(const GroupedSample& samples, const BinPartition& partition,
                                       Index i, Index j);

/// Cross-validated AMISE with a fixed topic matrix: the squared-norm integral
/// of g minus (2/n) sum_i (1/N_i) sum_j b_{i(-ij)}' g_{(-ij)}(X_ij), where
/// the leave-one-out T, S and Y diag(1/N) are exact downdates. Everything that
/// does not depend on the bandwidth is prepared once.
class LeaveOneOutCriterion {
 public:
  struct Terms {
    double quadratic = 0.0;
    double cross = 0.0;
    double amise() const { return quadratic - cross; }
  };

  LeaveOneOutCriterion(const GroupedSample& samples, const BinPartition& partition, const Matrix& topics,
                       const CvOptions& options);

  Terms evaluate(const KernelSpec& kernel, const Matrix& quad_grid, Index points_per_axis) const;

  /// b_{i(-ij)}' g_{(-ij)}(X_ij) for storage index `point`.
  double leave_one_out_term(Index point, const KernelSpec& kernel) const;

  const std::vector<Index>& selected_points() const { return selected_; }
  const Regularization& regularization() const { return regularization_; }

 private:
  double refit_term(Index point, const KernelSpec& kernel) const;

  const GroupedSample& samples_;
  const BinPartition& partition_;
  Matrix topics_;
  CvOptions options_;
  std::vector<Index> bins_;
  Matrix topic_gram_;          // G'G
  Matrix full_gram_;           // G'TG
  Regularization regularization_;
  Matrix group_projection_;    // K x n, G'Y_i
  std::vector<Matrix> group_diag_;  // G' diag(Y_i) G
  Matrix point_weights_;       // P x K, G'c_p
  std::vector<Index> selected_;
};

double amise_estimate(const GroupedSample& samples, const BinPartition& partition, const Matrix& topics,
                      const KernelSpec& kernel, const Matrix& quad_grid, const CvOptions& options = {});

struct BandwidthSelection {
  double bandwidth = 0.0;
  Index index = -1;
  std::vector<CvScore> scores;
};

/// Minimizes the criterion over the grid; ties go to the larger bandwidth.
/// `family` supplies the kernel family and order.
BandwidthSelection select_bandwidth(const GroupedSample& samples, const BinPartition& partition,
                                    const Matrix& topics, const BandwidthGrid& grid, const CvOptions& options,
                                    const KernelSpec& family);

/// Builds the default bins and the topic matrix first.
BandwidthSelection select_bandwidth(const GroupedSample& samples, Index topics, const BandwidthGrid& grid,
                                    const CvOptions& options, const KernelSpec& family);

}  // namespace demix
