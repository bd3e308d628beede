#pragma once

#include "demix/binning.hpp"
#include "demix/common.hpp"
#include "demix/kernels.hpp"

#include <vector>

namespace demix {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Diagonal-deleted within-group co-occurrence matrix
///   T = sum_i (Y_i Y_i' - diag(Y_i)) / (N_i (N_i - 1)).
/// Requires N_i >= 2 in every group.
Matrix compute_T(const HistogramMatrix& histogram);
Matrix compute_T(const GroupedSample& samples, const BinPartition& partition);

/// Plug-in counterpart sum_i Y_i Y_i' / N_i^2 (pairs j = j' included).
Matrix compute_plugin_T(const HistogramMatrix& histogram);

/// Row p holds c_p(m) = (Y_i(m) - [X_p in bin m]) / (N_i (N_i - 1)) for the
/// point p in group i. Each row sums to 1/N_i.
struct PairWeightTensor {
  Matrix weights;  // P x M
};

PairWeightTensor compute_pair_weights(const GroupedSample& samples, const BinPartition& partition);

/// S(x): M x n, column i = sum_j K_h(x - X_ij) c_ij.
template <typename Derived>
Matrix compute_S(const GroupedSample& samples, const PairWeightTensor& pairs, const KernelSpec& kernel,
                 const Eigen::MatrixBase<Derived>& x) {
  Matrix s = Matrix::Zero(pairs.weights.cols(), samples.group_count());
  for (Index p = 0; p < samples.total_points(); ++p) {
    const double k = kernel.scaled(x, samples.points().row(p));
    if (k != 0.0) s.col(samples.group_of(p)) += k * pairs.weights.row(p).transpose();
  }
  return s;
}

/// x -> sum_p K_h(x - X_p) w_p, a K-vector. Points are kept sorted by their
/// first coordinate so that evaluation only visits points inside the kernel
/// truncation window.
class WeightedDensityEstimate {
 public:
  WeightedDensityEstimate(const Matrix& points, const Matrix& weights, KernelSpec kernel);

  Index component_count() const { return weights_.cols(); }
  Index dimension() const { return points_.cols(); }
  Index point_count() const { return points_.rows(); }
  const KernelSpec& kernel() const { return kernel_; }

  /// Weights and points in the caller's original order.
  Matrix weights() const;
  Matrix points() const;

  /// Sum of all weight vectors.
  Vector total_weight() const { return weights_.colwise().sum().transpose(); }

  Vector evaluate(const Eigen::Ref<const Vector>& x) const;

  /// K x G matrix; grid points are the rows of `grid`.
  Matrix evaluate_on_grid(const Matrix& grid) const;

  WeightedDensityEstimate with_kernel(const KernelSpec& kernel) const;

 private:
  void accumulate(const double* x, double* out) const;

  Matrix points_;                // sorted by first coordinate
  RowMatrix weights_;            // same order
  std::vector<double> leading_;  // first coordinates, sorted
  std::vector<Index> original_;  // sorted position -> caller index
  KernelSpec kernel_;
};

Matrix evaluate_on_grid(const WeightedDensityEstimate& estimate, const Matrix& grid);

/// Ridge added to G'TG. `rule` applies epsilon = K n / M^2 whenever
/// lambda_min(G'TG) < K n / (M^2 ln^2(P)), P the total point count; `none`
/// still evaluates the event but never adds the ridge.
enum class Ridge { rule, none };

struct Regularization {
  double lambda_min = 0.0;
  double threshold = 0.0;
  bool triggered = false;  // lambda_min below threshold
  double epsilon = 0.0;    // ridge actually applied
  bool fired() const { return epsilon > 0.0; }
};

Regularization regularization_for(const Matrix& gram, Index topics, Index groups, Index bins,
                                  double total_points, Ridge ridge = Ridge::rule);

struct DemixFit {
  WeightedDensityEstimate estimate;
  Regularization regularization;
  Matrix gram;      // G'TG
  Matrix operator_; // K x M: G'G (G'TG + eps I)^{-1} G'
};

/// Topic-weighted, diagonal-deleted estimator
///   g(x) = G'G (G'TG + eps I)^{-1} G' S(x) 1_n.
DemixFit build_demix_estimator(const GroupedSample& samples, const BinPartition& partition,
                               const Matrix& topics, const KernelSpec& kernel, Ridge ridge = Ridge::rule);

/// Weighted KDE with the true memberships: w_ij = b_i / (n N_i),
/// b_i = (Pi'Pi / n)^{-1} pi_i.
WeightedDensityEstimate oracle_estimator(const GroupedSample& samples, const Matrix& memberships,
                                         const KernelSpec& kernel);

/// Biased plug-in baseline: G'G (G' T~ G)^{-1} G' S~(x) 1_n with all pairs
/// (including j = j') kept.
WeightedDensityEstimate plugin_estimator(const GroupedSample& samples, const BinPartition& partition,
                                         const Matrix& topics, const KernelSpec& kernel);

struct Memberships {
  Matrix raw;        // n x K, diag(1/N) Y' G (G'G)^{-1}
  Matrix projected;  // rows projected onto the probability simplex
};

Memberships estimate_memberships(const Matrix& counts, const Vector& sizes, const Matrix& topics);
Memberships estimate_memberships(const HistogramMatrix& histogram, const Matrix& topics);

/// Euclidean projection onto {w >= 0, sum w = 1}.
Vector project_to_simplex(const Vector& v);

}  // namespace demix
